from collections import Counter

import pytest
from conftest import BASE, population, record
from hypothesis import given, settings
from hypothesis import strategies as st

from hag.errors import EmptyPopulation, InvariantViolation, UnknownDimension
from hag.persona import (
    UNKNOWN,
    Category,
    DimensionSchema,
    Distribution,
    PersonaRecord,
    PersonaVector,
    Population,
    Provenance,
    marginal,
    validate_record,
)


def test_default_schema_shape(schema):
    assert len(schema) == 12
    by_cat = Counter(d.category for d in schema)
    assert by_cat == {Category.BASIC: 5, Category.SOCIOECONOMIC: 5, Category.CULTURAL: 2}
    assert len(set(schema.ids)) == 12
    for d in schema:
        if d.vocabulary:
            assert len(set(d.vocabulary)) == len(d.vocabulary)
            assert all(v.strip() for v in d.vocabulary)


def test_open_and_closed_vocabularies(schema):
    open_dims = {d.id for d in schema if not d.closed}
    assert open_dims == {"country", "language", "occupation", "ethnicity"}
    assert schema.get("age").vocabulary[1] == "18-24"


def test_schema_resolves_names_and_ids(schema):
    assert schema.resolve("Income Level") == "income_level"
    assert schema.resolve("income level") == "income_level"
    assert schema.resolve("income_level") == "income_level"
    assert schema.resolve("Income") is None
    with pytest.raises(UnknownDimension):
        schema.get("height")


def test_schema_round_trip(schema, tmp_path):
    path = tmp_path / "schema.json"
    path.write_text(__import__("json").dumps(schema.to_dict()))
    assert DimensionSchema.load(path) == schema


def test_valid_record_has_no_violations(schema):
    assert validate_record(record(), schema) == []


def test_missing_dimension_reported(schema):
    values = {k: v for k, v in BASE.items() if k != "age"}
    v = validate_record(PersonaRecord(values, source_id="x"), schema)
    assert [(x.kind, x.dimension_id) for x in v] == [("MissingDimension", "age")]


def test_label_outside_closed_vocabulary(schema):
    v = validate_record(record(gender="Robot"), schema)
    allowed = schema.get("gender").vocabulary
    assert "Robot" not in allowed
    assert [(x.kind, x.dimension_id) for x in v] == [("UnknownLabel", "gender")]


def test_unknown_label_policy(schema):
    rec = record(religion=UNKNOWN)
    assert validate_record(rec, schema) == []
    assert [x.kind for x in validate_record(rec, schema, allow_unknown=False)] == ["UnknownLabel"]


def test_open_dimension_accepts_new_labels(schema):
    assert validate_record(record(country="Atlantis"), schema) == []


def test_real_record_requires_source_id():
    with pytest.raises(InvariantViolation):
        PersonaRecord(BASE, Provenance.REAL)
    PersonaRecord(BASE, Provenance.AUGMENTED)


def test_persona_vector_rejects_repeats():
    with pytest.raises(InvariantViolation):
        PersonaVector.of(("age", "18-24"), ("age", "65+"))
    v = PersonaVector.of(("education", "Master")).extend("income_level", "High")
    assert v.dims == ("education", "income_level") and v.prefix(1).labels == ("Master",)


def test_marginal_half_half():
    pop = population([{"age": "Young"}, {"age": "Young"}, {"age": "Old"}, {"age": "Old"}])
    assert marginal(pop, "age").entries == {"Old": 0.5, "Young": 0.5}


def test_marginal_single_member():
    assert marginal(population([{}]), "gender").entries == {"Female": 1.0}


def test_marginal_counts():
    rows = [{"gender": "Male"}] * 7 + [{"gender": "Female"}] * 3
    m = marginal(population(rows), "gender")
    assert m["Male"] == pytest.approx(0.7, abs=1e-12) and m["Female"] == pytest.approx(0.3, abs=1e-12)


def test_marginal_excludes_unknown():
    m = marginal(population([{"religion": UNKNOWN}, {"religion": "Hindu"}]), "religion")
    assert m.entries == {"Hindu": 1.0}


def test_marginal_errors():
    with pytest.raises(EmptyPopulation):
        marginal(Population("t", ()), "age")
    with pytest.raises(UnknownDimension):
        marginal(population([{}]), "height")


def test_distribution_invariants():
    with pytest.raises(InvariantViolation):
        Distribution("x", {"a": 0.5, "b": 0.4})
    with pytest.raises(InvariantViolation):
        Distribution("x", {"a": 1.5, "b": -0.5})


def test_population_round_trip(tmp_path):
    pop = Population("topic", (record(0), record(1, Provenance.AUGMENTED, age="65+")), {"seed": 3})
    path = pop.save(tmp_path / "pop.json")
    assert Population.load(path) == pop


labels = st.sampled_from(["Male", "Female", UNKNOWN])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["18-24", "25-34", "65+", UNKNOWN]), min_size=1, max_size=40))
def test_marginal_is_a_distribution(ages):
    pop = population([{"age": a} for a in ages])
    if all(a == UNKNOWN for a in ages):
        with pytest.raises(EmptyPopulation):
            marginal(pop, "age")
        return
    m = marginal(pop, "age")
    assert abs(sum(m.entries.values()) - 1) <= 1e-9
    assert min(m.entries.values()) >= 0


@settings(max_examples=60, deadline=None)
@given(st.permutations(list(BASE)), labels, st.booleans())
def test_validation_is_order_independent_and_idempotent(order, gender, drop):
    values = {k: BASE[k] for k in order}
    values["gender"] = gender
    if drop:
        values.pop(order[0])
    rec = PersonaRecord(values, Provenance.AUGMENTED)
    from hag.persona import default_schema

    schema = default_schema()
    first = validate_record(rec, schema)
    assert first == validate_record(rec, schema)
    shuffled = PersonaRecord(dict(sorted(values.items())), Provenance.AUGMENTED)
    assert sorted(map(repr, first)) == sorted(map(repr, validate_record(shuffled, schema)))


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.sampled_from(list(BASE)), st.text(min_size=1, max_size=8), min_size=1), st.booleans())
def test_record_round_trip(values, real):
    prov = Provenance.REAL if real else Provenance.AUGMENTED
    rec = PersonaRecord(values, prov, source_id="id-1" if real else None, free_text="x")
    assert PersonaRecord.from_dict(rec.to_dict()) == rec
