import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hag.errors import (
    ConstraintViolatedInResponse,
    DisallowedValue,
    EmptyDistribution,
    MalformedJudgeResponse,
    MalformedResponse,
    NoJsonFound,
    OfflineViolation,
    ProviderUnreachable,
    ReplayMiss,
    SchemaMismatch,
    UnknownDimensionInResponse,
)
from hag.persona import UNKNOWN, PersonaVector, Provenance, validate_record
from hag.provider import (
    ChatRequest,
    HttpChatBackend,
    KnowledgeProvider,
    MockBackend,
    ProviderParams,
    RecordingBackend,
    ReplayBackend,
    make_provider,
    parse_structured,
    read_transcript,
)


class Scripted:
    """Backend answering from a fixed list of raw strings, keeping every request."""

    kind = "mock"
    default_model = "scripted"

    def __init__(self, *answers):
        self.answers = list(answers)
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        return self.answers.pop(0)


def dist(*pairs):
    return json.dumps({"distribution": [{"value": v, "probability": p} for v, p in pairs]})


# -- parsing -------------------------------------------------------------------

def test_parse_plain_object():
    assert parse_structured('{"a": 1}') == {"a": 1}


def test_parse_fenced_block_with_prose():
    raw = 'Sure! Here it is:\n```json\n{"dimensions": ["Age"]}\n```\nHope this helps.'
    assert parse_structured(raw, ("dimensions",)) == {"dimensions": ["Age"]}


def test_parse_prose_around_object_and_trailing_comma():
    assert parse_structured('The answer is {"x": [1, 2,],} ok') == {"x": [1, 2]}


def test_parse_skips_non_json_braces():
    assert parse_structured('use {curly} like {"k": "v"}') == {"k": "v"}


def test_parse_failures():
    with pytest.raises(NoJsonFound):
        parse_structured("no json here")
    with pytest.raises(SchemaMismatch):
        parse_structured('{"a": 1}', ("b",))


@settings(max_examples=80, deadline=None)
@given(
    st.dictionaries(st.text(min_size=1, max_size=6), st.integers() | st.text(max_size=6), min_size=1, max_size=4),
    st.text(alphabet="abc .:\n", max_size=20),
    st.text(alphabet="abc .:\n", max_size=20),
)
def test_parse_recovers_object_from_surrounding_prose(obj, before, after):
    assert parse_structured(before + json.dumps(obj) + after) == obj


# -- prioritization --------------------------------------------------------------

def test_prioritize_maps_names_dedups_and_truncates(schema):
    backend = Scripted(json.dumps({"dimensions": ["Education", "income level", "Education", "Age", "Gender"]}))
    p = KnowledgeProvider(backend, ProviderParams(max_depth=3))
    assert p.prioritize_dims("Topic", schema) == ["education", "income_level", "age"]
    prompt = backend.requests[0].messages[0]["content"]
    assert "up to 3 most critical" in prompt and "Topic" in prompt


def test_prioritize_repairs_unknown_dimension(schema):
    backend = Scripted(json.dumps({"dimensions": ["Height"]}), json.dumps({"dimensions": ["Religion"]}))
    p = KnowledgeProvider(backend)
    assert p.prioritize_dims("T", schema) == ["religion"]
    repair = backend.requests[1].messages
    assert len(repair) == 3 and "Height" in repair[2]["content"]
    assert backend.requests[1].attempt == 1


def test_prioritize_gives_up_with_last_error_type(schema):
    backend = Scripted(*[json.dumps({"dimensions": ["Height"]})] * 4)
    with pytest.raises(UnknownDimensionInResponse):
        KnowledgeProvider(backend, ProviderParams(retries=3)).prioritize_dims("T", schema)
    assert len(backend.requests) == 4


# -- conditionals ----------------------------------------------------------------

def test_conditional_normalizes_within_band(schema):
    p = KnowledgeProvider(Scripted(dist(("Low", 0.3), ("Medium", 0.3), ("High", 0.35))))
    out = p.infer_conditional("T", "income_level", PersonaVector(), allowed=["Low", "Medium", "High"], schema=schema)
    assert [w.label for w in out] == ["Low", "Medium", "High"]
    assert sum(w.weight for w in out) == pytest.approx(1.0, abs=1e-12)
    assert out[0].weight == pytest.approx(0.3 / 0.95)


def test_conditional_prompt_carries_full_context(schema):
    backend = Scripted(dist(("High", 1.0)))
    ctx = PersonaVector.of(("education", "Doctorate"), ("age", "25-34"))
    KnowledgeProvider(backend).infer_conditional("Chess", "income_level", ctx, schema=schema)
    prompt = backend.requests[0].messages[0]["content"]
    assert 'Given the topic "Chess" and a person with Education=Doctorate, Age=25-34' in prompt


@pytest.mark.parametrize(
    "bad, error",
    [
        (dist(("Low", 0.5), ("Medium", 0.2)), MalformedResponse),  # sums to 0.7
        (dist(("Low", 0.0)), EmptyDistribution),
        (dist(("Rich", 1.0)), DisallowedValue),
        (dist(("Low", 0.5), ("low", 0.5)), MalformedResponse),
        (dist(*[(v, 1 / 6) for v in ["Low", "Medium", "High"] * 2]), MalformedResponse),
        ('{"distribution": "Low"}', SchemaMismatch),
    ],
)
def test_conditional_rejections_are_retried(schema, bad, error):
    backend = Scripted(bad, dist(("Low", 1.0)))
    p = KnowledgeProvider(backend, ProviderParams(max_branches=5))
    out = p.infer_conditional("T", "income_level", PersonaVector(), allowed=["Low", "Medium", "High"], schema=schema)
    assert [w.label for w in out] == ["Low"]
    with pytest.raises(error):
        KnowledgeProvider(Scripted(bad), ProviderParams(retries=0)).infer_conditional(
            "T", "income_level", PersonaVector(), allowed=["Low", "Medium", "High"], schema=schema
        )


def test_conditional_drops_zero_weights_and_canonicalizes(schema):
    p = KnowledgeProvider(Scripted(dist(("bachelor", 0.6), ("MASTER", 0.4), ("Doctorate", 0))))
    out = p.infer_conditional("T", "education", PersonaVector(), allowed=schema.get("education").vocabulary, schema=schema)
    assert [(w.label, w.weight) for w in out] == [("Bachelor", 0.6), ("Master", 0.4)]


def test_conditional_open_dimension_rejects_unknown(schema):
    p = KnowledgeProvider(Scripted(dist((UNKNOWN, 1.0))), ProviderParams(retries=0))
    with pytest.raises(DisallowedValue):
        p.infer_conditional("T", "country", PersonaVector(), schema=schema)


# -- persona generation --------------------------------------------------------

def test_generate_persona_keeps_fixed_values(schema):
    backend = MockBackend(seed=3)
    p = KnowledgeProvider(backend)
    fixed = PersonaVector.of(("education", "Doctorate"), ("income_level", "High"))
    rec = p.generate_persona("T", fixed, schema)
    assert rec.provenance is Provenance.AUGMENTED and rec.matches(fixed)
    assert validate_record(rec, schema, allow_unknown=False) == []


def test_generate_persona_rejects_changed_constraint(schema):
    values = {d.name: (d.vocabulary[0] if d.vocabulary else "X") for d in schema}
    values["Education"] = "Master"
    backend = Scripted(json.dumps({"profile": values}))
    with pytest.raises(ConstraintViolatedInResponse):
        KnowledgeProvider(backend, ProviderParams(retries=0)).generate_persona(
            "T", PersonaVector.of(("education", "Doctorate")), schema
        )


def test_generate_persona_fully_fixed_needs_no_call(schema):
    backend = Scripted()
    full = PersonaVector.of(*[(d.id, d.vocabulary[0] if d.vocabulary else "X") for d in schema])
    rec = KnowledgeProvider(backend).generate_persona("T", full, schema)
    assert rec.values == full.as_dict() and backend.requests == []


def test_infer_profile_allows_unknown_and_rejects_invented(schema):
    good = {d.name: UNKNOWN for d in schema}
    out = KnowledgeProvider(Scripted(json.dumps(good))).infer_profile("astro", "u1", "- text", schema)
    assert set(out.values()) == {UNKNOWN}
    bad = dict(good, Gender="Robot")
    backend = Scripted(json.dumps(bad), json.dumps(good))
    assert KnowledgeProvider(backend).infer_profile("astro", "u1", "- text", schema)["gender"] == UNKNOWN
    with pytest.raises(ConstraintViolatedInResponse):
        KnowledgeProvider(Scripted(json.dumps(bad)), ProviderParams(retries=0)).infer_profile("a", "u", "t", schema)


# -- judging -------------------------------------------------------------------

def test_judge_scores_must_be_integers_in_range():
    backend = Scripted('{"archetype_coherence_score": 0}', '{"archetype_coherence_score": 4, "reasoning": "ok"}')
    assert KnowledgeProvider(backend).judge_archetypes("T", "<div/>") == (4, "ok")
    backend = Scripted(*['{"internal_consistency_score": 6}'] * 2)
    with pytest.raises(MalformedJudgeResponse):
        KnowledgeProvider(backend, ProviderParams(retries=1)).judge_individual("T", {"Age": "65+"})
    with pytest.raises(MalformedJudgeResponse):
        KnowledgeProvider(Scripted('{"internal_consistency_score": 3.5}'), ProviderParams(retries=0)).judge_individual(
            "T", {}
        )


# -- mock backend ----------------------------------------------------------------

def test_mock_is_deterministic_and_valid(schema):
    a, b = KnowledgeProvider(MockBackend(seed=5)), KnowledgeProvider(MockBackend(seed=5))
    dims = a.prioritize_dims("Birdwatching", schema)
    assert dims == b.prioritize_dims("Birdwatching", schema)
    for d in dims:
        da = a.infer_conditional("Birdwatching", d, PersonaVector(), allowed=schema.get(d).vocabulary, schema=schema)
        db = b.infer_conditional("Birdwatching", d, PersonaVector(), allowed=schema.get(d).vocabulary, schema=schema)
        assert da == db and 1 <= len(da) <= 5


def test_mock_tables_and_overrides(schema):
    backend = MockBackend(
        dimensions={"*": ["Gender"]},
        conditionals={("*", "gender", ()): [("Male", 0.25), ("Female", 0.75)]},
        judge_score=2,
    )
    p = KnowledgeProvider(backend)
    assert p.prioritize_dims("x", schema) == ["gender"]
    assert [(w.label, w.weight) for w in p.infer_conditional("x", "gender", PersonaVector(), schema=schema)] == [
        ("Male", 0.25),
        ("Female", 0.75),
    ]
    assert p.judge_individual("x", {})[0] == 2
    broken = MockBackend(overrides={"prioritize": lambda req: "garbage"})
    with pytest.raises(NoJsonFound):
        KnowledgeProvider(broken, ProviderParams(retries=1)).prioritize_dims("x", schema)


# -- transport -------------------------------------------------------------------

def _request():
    return ChatRequest("judge_individual", "m", 0.0, ({"role": "user", "content": "hi"},))


def test_http_backend_posts_openai_shape():
    seen = {}

    def handler(req: httpx.Request):
        seen["url"] = str(req.url)
        seen["auth"] = req.headers.get("authorization")
        seen["body"] = json.loads(req.content)
        return httpx.Response(200, json={"choices": [{"message": {"content": "hello"}}]})

    backend = HttpChatBackend("http://llm.test/v1", api_key="k", offline=False, transport=httpx.MockTransport(handler))
    assert backend.complete(_request()) == "hello"
    assert seen["url"] == "http://llm.test/v1/chat/completions"
    assert seen["auth"] == "Bearer k"
    assert seen["body"] == {"model": "m", "temperature": 0.0, "messages": [{"role": "user", "content": "hi"}]}


def test_http_backend_retries_server_errors():
    calls = []

    def handler(req):
        calls.append(1)
        if len(calls) == 1:
            return httpx.Response(503)
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

    backend = HttpChatBackend("http://x", offline=False, max_retries=2, transport=httpx.MockTransport(handler))
    assert backend.complete(_request()) == "ok" and len(calls) == 2


def test_http_backend_client_error_is_unreachable():
    backend = HttpChatBackend(
        "http://x", offline=False, max_retries=1, transport=httpx.MockTransport(lambda r: httpx.Response(401))
    )
    with pytest.raises(ProviderUnreachable):
        backend.complete(_request())


def test_http_backend_refuses_offline():
    with pytest.raises(OfflineViolation):
        HttpChatBackend("http://x").complete(_request())


def test_record_then_replay(tmp_path, schema):
    path = tmp_path / "t.jsonl"
    rec = make_provider("mock", seed=2, record=path)
    dims = rec.prioritize_dims("Sailing", schema)
    d0 = rec.infer_conditional("Sailing", dims[0], PersonaVector(), schema=schema)
    entries = read_transcript(path)
    assert [e["task"] for e in entries] == ["prioritize", "conditional"]
    assert all(e["latency_s"] == 0.0 for e in entries)
    rep = make_provider("replay", transcript=path)
    assert rep.model == rec.model
    assert rep.prioritize_dims("Sailing", schema) == dims
    assert rep.infer_conditional("Sailing", dims[0], PersonaVector(), schema=schema) == d0
    with pytest.raises(ReplayMiss):
        rep.prioritize_dims("Knitting", schema)


def test_recording_backend_keeps_entries_in_memory():
    backend = RecordingBackend(Scripted("x"))
    assert backend.complete(_request()) == "x"
    assert backend.entries[0]["response"] == "x" and backend.entries[0]["key"] == _request().key


def test_replay_serves_repeated_keys_in_order():
    req = _request()
    rb = ReplayBackend([{"key": req.key, "response": "a", "request": {"model": "m"}}, {"key": req.key, "response": "b"}])
    assert (rb.complete(req), rb.complete(req)) == ("a", "b")
    with pytest.raises(ReplayMiss):
        rb.complete(req)
