"""Prompt templates for the world-knowledge model and the judge."""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence

PRIORITIZE = """You are a computational sociologist. Your task is to determine the most important user profile dimensions for a social network simulation on the topic "{topic}".

Please identify up to {max_depth} most critical demographic dimensions from the table below and rank them in descending order of their influence on people's opinions and behaviors related to this topic.
The dimensions in the table are:
{dimension_list}

Please output a list in the following JSON format strictly:
{{
    "dimensions": ["Dimension 1", "Dimension 2", "Dimension 3", "Dimension 4"]
}}"""

CONDITIONAL = """You are a computational sociologist. {context_str}, please generate a plausible probability distribution for the dimension "{dimension}".

List the primary values for this dimension and assign a probability to each.
Provide the most relevant and meaningful values for this context - you can provide anywhere from 1 to {max_branches} values, depending on what makes sense for the given context.

**IMPORTANT**: Choose the number of values based on what is actually meaningful and significant for this specific context.
- If only 1-3 categories are truly relevant, use only 1-3 values.
- If more categories are meaningful, you can use up to {max_branches} values.
- Do NOT artificially inflate the number of categories just to reach the maximum.

Focus on the most significant categories rather than trying to fill up to the maximum number.
The sum of all probabilities must be exactly 1.0.

Strictly adhere to the following JSON format for your output:
{{
    "distribution": [
        {{"value": "Value 1", "probability": 0.xx}},
        ...
    ]
}}
{allowed_clause}"""

ALLOWED_CLAUSE = "ALLOWED VALUES (choose ONLY from this list): {values}"

CONSTRAINED_PERSONA = """You are a computational sociologist building agents for a social simulation on the topic "{topic}".

Create one realistic individual (variant #{variant}) whose profile MUST keep these attributes exactly as given:
{fixed_block}

Fill in the remaining attributes so that the whole profile is internally consistent and plausible for someone with the fixed attributes above. Do not change or repeat the fixed attributes.

**ALLOWED VALUES (choose ONLY from these lists)**:
{constraints_text}

Return a JSON object that exactly matches this template structure:
{template_json}"""

BATCH_PERSONAS = """You are a computational sociologist. Generate {count} diverse, realistic user personas who would take part in a social simulation on the topic "{topic}" (batch {batch}).

Every persona must specify all of these dimensions: {dimension_names}.

**ALLOWED VALUES (choose ONLY from these lists)**:
{constraints_text}

Return a JSON object of the form:
{{
    "personas": [{template_json}, ...]
}}"""

TEXT_TO_PERSONA = """You are a computational sociologist analyzing social media posts to generate realistic user profiles.

**TASK**: Generate a user profile based on the provided social media posts from the "{theme}" community.{dimension_info}
**USER'S POSTS**:
{user_text}

**INSTRUCTIONS**:
1. Analyze the user's posts to infer their demographic characteristics, Make reasonable inferences based on the content, language, and context of the posts
2. Generate a realistic user profile that matches the template structure, Only generate values for the dimensions specified in the template
3. Replace all "__FILL__" placeholders with appropriate values, Ensure all values are chosen from the allowed constraints below


**ALLOWED VALUES (choose ONLY from these lists)**:
{constraints_text}

**IMPORTANT CONSTRAINTS**:
- You MUST choose values ONLY from the allowed lists above, Do NOT invent new values or categories
- If the posts give insufficient clues to determine a value, return "Unknown" for that dimension
- Consider the theme context: "{theme}" community members may have specific characteristics
- Only generate the dimensions specified in the template - do not add extra fields

**OUTPUT FORMAT**:
Return a JSON object that exactly matches this template structure:
{template_json}

**ANALYSIS GUIDELINES**:
- Age: Infer from language style, references to life events, generational markers
- Education: Consider vocabulary, topic complexity, academic references
- Country: Look for location mentions, cultural references, language patterns
- Occupation: Analyze professional topics, work-related discussions
- Religion: Consider religious references, holidays, cultural practices
- Other fields: Make reasonable inferences based on available information

Generate the user profile now:"""

JUDGE_ARCHETYPES = """You are an expert computational sociologist.

DOMINANT CLUSTERS:
{dom_snippet}

THEME / TOPIC CONTEXT:
{theme_context}

Question:
Are these dominant archetypes (typical groups) the core stakeholders for this topic?
Consider whether age, education, occupation, country, language and other demographics
form plausible and meaningful typical user types that align with sociological expectations.

Scoring guide:
- 1: Archetypes are completely irrelevant or implausible for this topic
- 3: Archetypes are somewhat relevant but have some issues
- 5: Archetypes are highly relevant and plausible as core stakeholders for this topic

Return format (must be a valid JSON object):
{{
"archetype_coherence_score": <int 1-5>,
"reasoning": "<short explanation>"
}}"""

JUDGE_INDIVIDUAL = """You are a computational social scientist who studies population structure.

Given the following theme/topic and a single agent profile, evaluate whether the
combination of demographic attributes (such as age, education, occupation, country, etc.)
is internally consistent and realistic for that theme.

Topic:
{context}

Agent Profile (JSON):
{user_profile}

Your task:
- Please only judge from the perspective of "logical consistency" and give a rating of 1-5 to indicate whether the attribute combination of the agent is reasonable and consistent in this real-world topic:
    1 = Very unreasonable (with obvious contradictions)
    3 = Generally reasonable (with some doubts but acceptable)
    5 = Very reasonable (there is no obvious contradiction)

Return format (must be a valid JSON object):
{{
  "internal_consistency_score": <int 1-5>,
  "reasoning": "<Short text explaining the main reason for judgment>"
}}"""

REPAIR = """Your previous response could not be used: {error}
Please answer the original request again, following the required JSON format exactly."""


def context_string(topic: str, context: Sequence[tuple[str, str]]) -> str:
    """Render a partial persona path, e.g. ``Given the topic "T" and a person with Age=25-34``."""
    head = f'Given the topic "{topic}"'
    if not context:
        return head
    attrs = ", ".join(f"{name}={label}" for name, label in context)
    return f"{head} and a person with {attrs}"


def numbered(names: Sequence[str]) -> str:
    return "\n".join(f"{i}. {n}" for i, n in enumerate(names, 1))


def constraints_text(allowed: Mapping[str, Sequence[str] | None]) -> str:
    lines = []
    for name, values in allowed.items():
        if values is None:
            lines.append(f"- {name}: free text")
        else:
            lines.append(f"- {name}: {', '.join(values)}")
    return "\n".join(lines)


def template_json(names: Sequence[str]) -> str:
    return json.dumps({n: "__FILL__" for n in names}, indent=2)
