"""The world-knowledge model: prompting, validation and repair.

``KnowledgeProvider`` owns the semantics of every model call.  Each call
renders a prompt, sends it through a backend, parses the reply and checks
it; a reply that fails a check is sent back with the error text appended,
up to ``params.retries`` times, after which the last error is raised.
"""

from __future__ import annotations

import json
import threading
from collections import Counter
from collections.abc import Callable, Mapping, Sequence
from dataclasses import asdict, dataclass
from typing import Any

from ..errors import (
    ConstraintViolatedInResponse,
    DisallowedValue,
    EmptyDistribution,
    MalformedJudgeResponse,
    MalformedResponse,
    ResponseError,
    SchemaMismatch,
    UnknownDimensionInResponse,
)
from ..persona import (
    UNKNOWN,
    DimensionSchema,
    PersonaRecord,
    PersonaVector,
    Provenance,
    default_schema,
)
from . import prompts
from .backends import ChatBackend, ChatRequest
from .parsing import normalize, parse_structured

# weight sums inside this band are renormalized silently
SUM_BAND = (0.9, 1.1)


@dataclass(frozen=True)
class ProviderParams:
    max_depth: int = 5
    max_branches: int = 5
    temperature: float = 0.0
    retries: int = 3

    def __post_init__(self):
        if self.max_depth < 1 or self.max_branches < 1:
            raise ValueError("max_depth and max_branches must be >= 1")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class WeightedValue:
    label: str
    weight: float

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight {self.weight} outside [0, 1]")


class KnowledgeProvider:
    def __init__(self, backend: ChatBackend, params: ProviderParams | None = None, model: str | None = None):
        self.backend = backend
        self.params = params or ProviderParams()
        self.model = model or getattr(backend, "default_model", "unknown")
        self.calls: Counter[str] = Counter()
        self._lock = threading.Lock()

    @property
    def fingerprint(self) -> dict:
        return {"model": self.model, "temperature": self.params.temperature}

    def _exchange(
        self,
        task: str,
        prompt: str,
        payload: Mapping[str, Any],
        check: Callable[[dict], Any],
        params: ProviderParams,
        required: Sequence[str] = (),
    ) -> Any:
        messages: list[dict] = [{"role": "user", "content": prompt}]
        last: ResponseError | None = None
        for attempt in range(params.retries + 1):
            request = ChatRequest(task, self.model, params.temperature, tuple(messages), payload, attempt)
            raw = self.backend.complete(request)
            with self._lock:
                self.calls[task] += 1
            try:
                return check(parse_structured(raw, required))
            except ResponseError as exc:
                last = exc
                messages = messages + [
                    {"role": "assistant", "content": raw},
                    {"role": "user", "content": prompts.REPAIR.format(error=exc)},
                ]
        raise type(last)(f"{task}: {last} (gave up after {params.retries + 1} attempts)") from last

    # -- tree construction -------------------------------------------------

    def prioritize_dims(
        self, topic: str, schema: DimensionSchema, params: ProviderParams | None = None
    ) -> list[str]:
        """Ordered, de-duplicated dimension ids relevant to ``topic``; at most ``max_depth``."""
        params = params or self.params
        if not topic.strip():
            raise ValueError("topic must be non-empty")
        names = [d.name for d in schema]

        def check(doc: dict) -> list[str]:
            dims = doc["dimensions"]
            if not isinstance(dims, list) or not all(isinstance(x, str) for x in dims):
                raise SchemaMismatch('"dimensions" must be a list of strings')
            out: list[str] = []
            for name in dims:
                dim_id = schema.resolve(name)
                if dim_id is None:
                    raise UnknownDimensionInResponse(
                        f"{name!r} is not one of the listed dimensions ({', '.join(names)})"
                    )
                if dim_id not in out:
                    out.append(dim_id)
            if not out:
                raise MalformedResponse("no dimensions returned")
            return out[: params.max_depth]

        prompt = prompts.PRIORITIZE.format(
            topic=topic, max_depth=params.max_depth, dimension_list=prompts.numbered(names)
        )
        payload = {"topic": topic, "dimension_names": names, "max_depth": params.max_depth}
        return self._exchange("prioritize", prompt, payload, check, params, required=("dimensions",))

    def infer_conditional(
        self,
        topic: str,
        dimension_id: str,
        context: PersonaVector,
        params: ProviderParams | None = None,
        allowed: Sequence[str] | None = None,
        schema: DimensionSchema | None = None,
    ) -> list[WeightedValue]:
        """Distribution of ``dimension_id`` given the topic and an ancestor path."""
        params = params or self.params
        schema = schema or default_schema()
        if dimension_id in context.dims:
            raise ValueError(f"{dimension_id} is already assigned in the context")
        dim = schema.get(dimension_id)
        allowed = list(allowed) if allowed is not None else None

        def check(doc: dict) -> list[WeightedValue]:
            items = doc["distribution"]
            if not isinstance(items, list):
                raise SchemaMismatch('"distribution" must be a list')
            if len(items) > params.max_branches:
                raise MalformedResponse(
                    f"{len(items)} values given; provide at most {params.max_branches} values"
                )
            labels: list[str] = []
            weights: list[float] = []
            for item in items:
                if not isinstance(item, dict):
                    raise SchemaMismatch("distribution entries must be objects")
                label = item.get("value", item.get("label"))
                weight = item.get("probability", item.get("weight"))
                if not isinstance(label, str) or not label.strip():
                    raise SchemaMismatch(f"bad value label {label!r}")
                if isinstance(weight, bool) or not isinstance(weight, (int, float)) or weight < 0:
                    raise MalformedResponse(f"bad probability {weight!r} for {label!r}")
                if allowed is not None:
                    canon = next((a for a in allowed if a.lower() == label.strip().lower()), None)
                    if canon is None:
                        raise DisallowedValue(f"{label!r} is not an allowed value ({', '.join(allowed)})")
                else:
                    canon = dim.canonical(label)
                    if canon is None or canon == UNKNOWN:
                        raise DisallowedValue(f"{label!r} is not a usable value for {dim.name}")
                if canon in labels:
                    raise MalformedResponse(f"value {canon!r} listed twice")
                if weight > 0:
                    labels.append(canon)
                    weights.append(float(weight))
            if not labels:
                raise EmptyDistribution("distribution has no values with positive probability")
            total = sum(weights)
            if not (SUM_BAND[0] - 1e-9 <= total <= SUM_BAND[1] + 1e-9):
                raise MalformedResponse(f"probabilities sum to {total:.4f}; they must sum to exactly 1.0")
            return [WeightedValue(lab, w) for lab, w in zip(labels, normalize(weights))]

        pairs = [(schema.get(a.dimension_id).name, a.label) for a in context]
        allowed_clause = prompts.ALLOWED_CLAUSE.format(values=", ".join(allowed)) if allowed else ""
        prompt = prompts.CONDITIONAL.format(
            context_str=prompts.context_string(topic, pairs),
            dimension=dim.name,
            max_branches=params.max_branches,
            allowed_clause=allowed_clause,
        )
        payload = {
            "topic": topic,
            "dimension": dimension_id,
            "dimension_name": dim.name,
            "context": [[a.dimension_id, a.label] for a in context],
            "max_branches": params.max_branches,
            "allowed": allowed,
            "candidates": list(dim.candidates()),
        }
        return self._exchange("conditional", prompt, payload, check, params, required=("distribution",))

    # -- persona synthesis -------------------------------------------------

    def _profile_values(
        self, doc: Mapping[str, Any], schema: DimensionSchema, wanted: Sequence[str], allow_unknown: bool,
        violation: type[ResponseError] = DisallowedValue,
    ) -> dict[str, str]:
        found: dict[str, str] = {}
        for key, label in doc.items():
            dim_id = schema.resolve(str(key))
            if dim_id is None or dim_id not in wanted:
                continue
            if not isinstance(label, str):
                raise SchemaMismatch(f"{key}: expected a string label, got {label!r}")
            canon = schema.get(dim_id).canonical(label)
            if canon is None or (canon == UNKNOWN and not allow_unknown):
                allowed = schema.get(dim_id).vocabulary
                hint = f" (allowed: {', '.join(allowed)})" if allowed else ""
                raise violation(f"{schema.get(dim_id).name}: {label!r} is not allowed{hint}")
            found[dim_id] = canon
        missing = [schema.get(d).name for d in wanted if d not in found]
        if missing:
            raise MalformedResponse(f"missing dimension(s): {', '.join(missing)}")
        return found

    def generate_persona(
        self,
        topic: str,
        fixed: PersonaVector,
        schema: DimensionSchema,
        params: ProviderParams | None = None,
        variant: int = 0,
    ) -> PersonaRecord:
        """An augmented persona that keeps every attribute in ``fixed`` exactly."""
        params = params or self.params
        for a in fixed:
            if schema.get(a.dimension_id).canonical(a.label) != a.label or a.label == UNKNOWN:
                raise ValueError(f"fixed value {a.dimension_id}={a.label!r} is not valid")
        fixed_map = fixed.as_dict()
        open_dims = [d for d in schema.ids if d not in fixed_map]
        if not open_dims:
            return PersonaRecord({d: fixed_map[d] for d in schema.ids}, Provenance.AUGMENTED)

        def check(doc: dict) -> dict[str, str]:
            profile = doc.get("profile", doc)
            if not isinstance(profile, dict):
                raise SchemaMismatch('"profile" must be an object')
            for key, label in profile.items():
                dim_id = schema.resolve(str(key))
                if dim_id in fixed_map and str(label).strip().lower() != fixed_map[dim_id].lower():
                    raise ConstraintViolatedInResponse(
                        f"{schema.get(dim_id).name} must be {fixed_map[dim_id]!r}, got {label!r}"
                    )
            return self._profile_values(profile, schema, open_dims, allow_unknown=False)

        fill = {d: (list(schema.get(d).candidates()) or None) for d in open_dims}
        prompt = prompts.CONSTRAINED_PERSONA.format(
            topic=topic,
            variant=variant,
            fixed_block="\n".join(f"- {schema.get(d).name}: {v}" for d, v in fixed_map.items()),
            constraints_text=prompts.constraints_text(
                {schema.get(d).name: schema.get(d).vocabulary for d in open_dims}
            ),
            template_json=prompts.template_json([schema.get(d).name for d in open_dims]),
        )
        payload = {"topic": topic, "fixed": fixed_map, "fill": fill, "variant": variant}
        filled = self._exchange("persona", prompt, payload, check, params)
        values = {d: fixed_map.get(d, filled.get(d)) for d in schema.ids}
        return PersonaRecord(values, Provenance.AUGMENTED)

    def generate_batch(
        self, topic: str, schema: DimensionSchema, count: int, batch: int = 0,
        params: ProviderParams | None = None,
    ) -> list[PersonaRecord | None]:
        """Unconstrained personas for ``topic``; entries that fail validation come back as None."""
        params = params or self.params
        names = [d.name for d in schema]

        def check(doc: dict) -> list[PersonaRecord | None]:
            items = doc["personas"]
            if not isinstance(items, list):
                raise SchemaMismatch('"personas" must be a list')
            out: list[PersonaRecord | None] = []
            for item in items[:count]:
                try:
                    if not isinstance(item, dict):
                        raise SchemaMismatch("persona must be an object")
                    values = self._profile_values(item, schema, schema.ids, allow_unknown=False)
                    out.append(PersonaRecord(values, Provenance.AUGMENTED))
                except ResponseError:
                    out.append(None)
            return out

        prompt = prompts.BATCH_PERSONAS.format(
            count=count,
            topic=topic,
            batch=batch,
            dimension_names=", ".join(names),
            constraints_text=prompts.constraints_text({d.name: d.vocabulary for d in schema}),
            template_json=prompts.template_json(names),
        )
        payload = {
            "topic": topic,
            "count": count,
            "batch": batch,
            "dims": {d.id: list(d.candidates()) or None for d in schema},
        }
        return self._exchange("batch", prompt, payload, check, params, required=("personas",))

    def infer_profile(
        self, theme: str, user_id: str, user_text: str, schema: DimensionSchema,
        params: ProviderParams | None = None,
    ) -> dict[str, str]:
        """Text-to-persona: labels inferred from a user's posts, ``Unknown`` where unclear."""
        params = params or self.params

        def check(doc: dict) -> dict[str, str]:
            profile = doc.get("profile", doc)
            if not isinstance(profile, dict):
                raise SchemaMismatch("profile must be an object")
            return self._profile_values(
                profile, schema, schema.ids, allow_unknown=True, violation=ConstraintViolatedInResponse
            )

        closed = {d.name: list(d.vocabulary) + [UNKNOWN] if d.vocabulary else None for d in schema}
        prompt = prompts.TEXT_TO_PERSONA.format(
            theme=theme,
            dimension_info="",
            user_text=user_text,
            constraints_text=prompts.constraints_text(closed),
            template_json=prompts.template_json([d.name for d in schema]),
        )
        payload = {
            "theme": theme,
            "user_id": user_id,
            "dims": {d.id: list(d.candidates()) or None for d in schema},
        }
        return self._exchange("profile", prompt, payload, check, params)

    # -- judging -----------------------------------------------------------

    @staticmethod
    def _score_check(key: str) -> Callable[[dict], tuple[int, str]]:
        def check(doc: dict) -> tuple[int, str]:
            score = doc.get(key)
            if isinstance(score, bool) or not isinstance(score, (int, float)) or score != int(score):
                raise MalformedJudgeResponse(f'"{key}" must be an integer from 1 to 5, got {score!r}')
            if not 1 <= score <= 5:
                raise MalformedJudgeResponse(f'"{key}" must be between 1 and 5, got {score}')
            return int(score), str(doc.get("reasoning", ""))

        return check

    def judge_archetypes(self, topic: str, dom_snippet: str, params: ProviderParams | None = None) -> tuple[int, str]:
        params = params or self.params
        prompt = prompts.JUDGE_ARCHETYPES.format(dom_snippet=dom_snippet, theme_context=topic)
        payload = {"topic": topic, "clusters": dom_snippet}
        return self._exchange(
            "judge_archetypes", prompt, payload, self._score_check("archetype_coherence_score"), params
        )

    def judge_individual(
        self, topic: str, profile: Mapping[str, str], params: ProviderParams | None = None
    ) -> tuple[int, str]:
        params = params or self.params
        profile_json = json.dumps(dict(profile), indent=2, ensure_ascii=False)
        prompt = prompts.JUDGE_INDIVIDUAL.format(context=topic, user_profile=profile_json)
        payload = {"topic": topic, "profile": dict(profile)}
        return self._exchange(
            "judge_individual", prompt, payload, self._score_check("internal_consistency_score"), params
        )
