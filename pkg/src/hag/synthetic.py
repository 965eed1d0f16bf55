"""A small generative model of survey respondents.

Used to produce the bundled sample database and toy corpus, and to build
worlds with known joint distributions for end-to-end checks.  Income
depends strongly on education; social class, financial situation and
occupation depend on the (education, income) pair jointly, so any method
that gets the education-income joint wrong also gets those marginals
wrong.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .persona import PersonaRecord, Population, Provenance
from .provider import KnowledgeProvider, MockBackend, ProviderParams

EDUCATION = ("Primary or less", "Lower secondary", "Upper secondary", "Post-secondary", "Bachelor", "Master", "Doctorate")
INCOME = ("Low", "Medium", "High")
HIGHER_ED = {"Bachelor", "Master", "Doctorate"}

GENERAL_EDUCATION = (0.12, 0.15, 0.28, 0.15, 0.18, 0.09, 0.03)
UNIFORM_EDUCATION = tuple([1 / 7] * 7)

INCOME_GIVEN_EDUCATION: dict[str, tuple[float, float, float]] = {
    "Primary or less": (0.90, 0.05, 0.05),
    "Lower secondary": (0.80, 0.15, 0.05),
    "Upper secondary": (0.90, 0.05, 0.05),
    "Post-secondary": (0.30, 0.60, 0.10),
    "Bachelor": (0.05, 0.90, 0.05),
    "Master": (0.10, 0.40, 0.50),
    "Doctorate": (0.05, 0.05, 0.90),
}

COUNTRIES = {
    # country: (weight, main language, ethnicity dist, religion dist)
    "United States": (0.16, "English", {"White": .6, "Black": .13, "Hispanic": .18, "Asian": .06, "Mixed": .03},
                      {"Protestant": .4, "Roman Catholic": .2, "No religion": .3, "Jewish": .02, "Other": .08}),
    "United Kingdom": (0.08, "English", {"White": .82, "Asian": .09, "Black": .04, "Mixed": .03, "Other": .02},
                       {"No religion": .5, "Protestant": .3, "Roman Catholic": .1, "Muslim": .06, "Other": .04}),
    "Germany": (0.10, "German", {"White": .88, "Arab": .04, "Asian": .03, "Other": .05},
                {"No religion": .4, "Protestant": .27, "Roman Catholic": .27, "Muslim": .06}),
    "India": (0.14, "Hindi", {"Asian": .98, "Other": .02},
              {"Hindu": .79, "Muslim": .14, "Other Christian": .03, "Other": .04}),
    "Brazil": (0.10, "Portuguese", {"Mixed": .45, "White": .43, "Black": .1, "Other": .02},
               {"Roman Catholic": .55, "Protestant": .3, "No religion": .12, "Other": .03}),
    "Nigeria": (0.10, "Hausa", {"Black": .99, "Other": .01},
                {"Muslim": .5, "Protestant": .3, "Roman Catholic": .12, "Other Christian": .06, "Other": .02}),
    "China": (0.12, "Chinese", {"Asian": .99, "Other": .01},
              {"No religion": .75, "Buddhist": .18, "Other": .07}),
    "Japan": (0.07, "Japanese", {"Asian": .99, "Other": .01},
              {"No religion": .6, "Buddhist": .35, "Other": .05}),
    "Mexico": (0.07, "Spanish", {"Hispanic": .9, "White": .08, "Other": .02},
               {"Roman Catholic": .78, "Protestant": .1, "No religion": .1, "Other": .02}),
    "Ukraine": (0.06, "Ukrainian", {"White": .97, "Other": .03},
                {"Orthodox": .75, "Roman Catholic": .08, "No religion": .12, "Other": .05}),
}

AGES = ("18-24", "25-34", "35-44", "45-54", "55-64", "65+")
AGE_WEIGHTS = (0.12, 0.20, 0.19, 0.17, 0.15, 0.17)
MARITAL_BY_AGE = {
    "young": {"Single": .7, "Living together as married": .15, "Married": .15},
    "adult": {"Married": .55, "Single": .2, "Living together as married": .1, "Divorced": .1, "Separated": .05},
    "old": {"Married": .55, "Widowed": .2, "Divorced": .15, "Single": .1},
}


def _cell(edu: str, inc: str) -> tuple[bool, str]:
    return edu in HIGHER_ED, inc


SOCIAL_CLASS = {
    (True, "High"): {"Upper middle class": .6, "Upper class": .3, "Lower middle class": .1},
    (False, "High"): {"Lower middle class": .5, "Upper middle class": .3, "Working class": .2},
    (True, "Medium"): {"Lower middle class": .6, "Upper middle class": .3, "Working class": .1},
    (False, "Medium"): {"Working class": .6, "Lower middle class": .4},
    (True, "Low"): {"Lower middle class": .5, "Working class": .4, "Lower class": .1},
    (False, "Low"): {"Working class": .5, "Lower class": .5},
}
FINANCIAL = {
    (True, "High"): {"Saved money": .8, "Just got by": .2},
    (False, "High"): {"Saved money": .5, "Just got by": .4, "Spent some savings": .1},
    (True, "Medium"): {"Saved money": .5, "Just got by": .4, "Spent some savings": .1},
    (False, "Medium"): {"Just got by": .6, "Saved money": .2, "Spent some savings": .2},
    (True, "Low"): {"Just got by": .5, "Spent some savings": .4, "Spent savings and borrowed": .1},
    (False, "Low"): {"Spent savings and borrowed": .4, "Spent some savings": .3, "Just got by": .3},
}
OCCUPATION = {
    (True, "High"): {"Higher administrative": .5, "Professional and technical": .5},
    (False, "High"): {"Skilled worker": .4, "Sales": .3, "Farm owner": .3},
    (True, "Medium"): {"Professional and technical": .8, "Clerical": .2},
    (False, "Medium"): {"Skilled worker": .5, "Clerical": .2, "Service": .3},
    (True, "Low"): {"Clerical": .4, "Service": .3, "Sales": .3},
    (False, "Low"): {"Unskilled worker": .4, "Semi-skilled worker": .3, "Farm worker": .3},
}


def _pick(rng: np.random.Generator, dist: Mapping[str, float], size: int) -> np.ndarray:
    labels = list(dist)
    p = np.asarray([dist[k] for k in labels], dtype=float)
    return np.asarray(labels, dtype=object)[rng.choice(len(labels), size=size, p=p / p.sum())]


def _grouped(rng, keys: Sequence, table: Mapping, out: np.ndarray) -> None:
    keys = list(keys)
    for key in sorted(set(keys), key=str):
        idx = np.asarray([i for i, k in enumerate(keys) if k == key])
        out[idx] = _pick(rng, table[key], idx.size)


def sample_people(
    n: int,
    seed: int,
    education_income: Mapping[tuple[str, str], float] | None = None,
    education_weights: Sequence[float] = GENERAL_EDUCATION,
) -> list[dict[str, str]]:
    """``n`` complete label dicts.

    ``education_income`` overrides the (education, income) joint; otherwise
    education follows ``education_weights`` and income the planted
    conditional table.
    """
    rng = np.random.default_rng(seed)
    if education_income is None:
        education_income = {
            (e, i): w * p
            for e, w in zip(EDUCATION, education_weights)
            for i, p in zip(INCOME, INCOME_GIVEN_EDUCATION[e])
        }
    cells = list(education_income)
    p = np.asarray([education_income[c] for c in cells], dtype=float)
    picks = rng.choice(len(cells), size=n, p=p / p.sum())
    edu = [cells[k][0] for k in picks]
    inc = [cells[k][1] for k in picks]

    countries = list(COUNTRIES)
    cw = np.asarray([COUNTRIES[c][0] for c in countries])
    country = np.asarray(countries, dtype=object)[rng.choice(len(countries), size=n, p=cw / cw.sum())]
    language = np.where(
        rng.random(n) < 0.9, [COUNTRIES[c][1] for c in country], "English"
    ).astype(object)
    ethnicity = np.empty(n, dtype=object)
    religion = np.empty(n, dtype=object)
    _grouped(rng, country, {c: COUNTRIES[c][2] for c in countries}, ethnicity)
    _grouped(rng, country, {c: COUNTRIES[c][3] for c in countries}, religion)

    gender = _pick(rng, {"Male": .5, "Female": .5}, n)
    age = _pick(rng, dict(zip(AGES, AGE_WEIGHTS)), n)
    stage = ["young" if a == "18-24" else "old" if a in ("55-64", "65+") else "adult" for a in age]
    marital = np.empty(n, dtype=object)
    _grouped(rng, stage, MARITAL_BY_AGE, marital)

    cell = [_cell(e, i) for e, i in zip(edu, inc)]
    social = np.empty(n, dtype=object)
    financial = np.empty(n, dtype=object)
    occupation = np.empty(n, dtype=object)
    _grouped(rng, cell, SOCIAL_CLASS, social)
    _grouped(rng, cell, FINANCIAL, financial)
    _grouped(rng, cell, OCCUPATION, occupation)

    return [
        {
            "country": str(country[k]),
            "language": str(language[k]),
            "gender": str(gender[k]),
            "age": str(age[k]),
            "marital_status": str(marital[k]),
            "education": edu[k],
            "occupation": str(occupation[k]),
            "income_level": inc[k],
            "financial_status": str(financial[k]),
            "social_class": str(social[k]),
            "religion": str(religion[k]),
            "ethnicity": str(ethnicity[k]),
        }
        for k in range(n)
    ]


def as_records(people: Sequence[Mapping[str, str]], prefix: str) -> list[PersonaRecord]:
    return [PersonaRecord(p, Provenance.REAL, source_id=f"{prefix}-{i:05d}") for i, p in enumerate(people)]


# -- worlds with a planted education -> income dependence ------------------------

@dataclass(frozen=True)
class CorrelatedWorld:
    """A topic whose population over-represents a few education levels.

    ``education`` is the topic's education marginal; income follows the
    planted conditional table, so the topic joint is far from the product
    of its marginals.
    """

    topic: str = "Climate science research community"
    education: Mapping[str, float] = field(
        default_factory=lambda: {"Upper secondary": 0.3, "Bachelor": 0.4, "Doctorate": 0.3}
    )

    def joint(self) -> dict[tuple[str, str], float]:
        return {
            (e, i): w * p
            for e, w in self.education.items()
            for i, p in zip(INCOME, INCOME_GIVEN_EDUCATION[e])
        }

    def income_marginal(self) -> dict[str, float]:
        out = dict.fromkeys(INCOME, 0.0)
        for (_, i), p in self.joint().items():
            out[i] += p
        return out

    def product(self) -> dict[tuple[str, str], float]:
        inc = self.income_marginal()
        return {(e, i): w * inc[i] for e, w in self.education.items() for i in INCOME}

    def ground_truth(self, n: int = 2000, seed: int = 7) -> Population:
        people = sample_people(n, seed, education_income=self.joint())
        return Population(self.topic, as_records(people, "gt"), {"generator": "ground-truth", "seed": seed})

    def database_records(self, n: int = 30000, seed: int = 11) -> list[PersonaRecord]:
        """General-population respondents with education spread evenly, so every cell is well covered."""
        return as_records(sample_people(n, seed, education_weights=UNIFORM_EDUCATION), "wvs")

    def conditional(self, topic: str, dim: str, context: Mapping[str, str]):
        if dim == "education" and not context:
            return list(self.education.items())
        if dim == "income_level":
            if "education" in context:
                return list(zip(INCOME, INCOME_GIVEN_EDUCATION[context["education"]]))
            if not context:
                return list(self.income_marginal().items())
        return None

    def oracle_backend(self, seed: int = 0) -> MockBackend:
        return MockBackend(
            seed=seed,
            dimensions={"*": ["Education", "Income Level"]},
            conditionals=self.conditional,
        )

    def oracle_provider(self, params: ProviderParams | None = None, seed: int = 0) -> KnowledgeProvider:
        return KnowledgeProvider(self.oracle_backend(seed), params=params)


# -- bundled assets ----------------------------------------------------------------

SAMPLE_DB_SIZE = 5000
SAMPLE_DB_SEED = 2024
SAMPLE_COLUMNS = (
    "D_INTERVIEW", "B_COUNTRY", "S_INTLANGUAGE", "Q260", "Q262", "Q273", "Q275",
    "Q281", "Q288", "Q286", "Q287", "Q289", "Q290",
)
_AGE_SPAN = {"18-24": (18, 24), "25-34": (25, 34), "35-44": (35, 44), "45-54": (45, 54), "55-64": (55, 64), "65+": (65, 89)}
_INCOME_SPAN = {"Low": (1, 3), "Medium": (4, 7), "High": (8, 10)}


def _inverse_codes(config: Mapping, dim: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for code, label in config["dimensions"][dim]["codes"].items():
        out.setdefault(label, code)  # first code wins where several map to one label
    return out


def encode_survey_rows(people: Sequence[Mapping[str, str]], seed: int, prefix: str = "S") -> list[dict[str, str]]:
    """Labels back to survey codes, with ages and incomes spread over their brackets."""
    from .grounding import default_harmonization

    config = default_harmonization()
    inverse = {d: _inverse_codes(config, d) for d, rule in config["dimensions"].items() if rule["type"] == "codes"}
    rng = np.random.default_rng(seed)
    rows = []
    for i, p in enumerate(people):
        lo, hi = _AGE_SPAN[p["age"]]
        ilo, ihi = _INCOME_SPAN[p["income_level"]]
        rows.append({
            "D_INTERVIEW": f"{prefix}{i:05d}",
            "B_COUNTRY": inverse["country"][p["country"]],
            "S_INTLANGUAGE": inverse["language"][p["language"]],
            "Q260": inverse["gender"][p["gender"]],
            "Q262": str(int(rng.integers(lo, hi + 1))),
            "Q273": inverse["marital_status"][p["marital_status"]],
            "Q275": inverse["education"][p["education"]],
            "Q281": inverse["occupation"][p["occupation"]],
            "Q288": str(int(rng.integers(ilo, ihi + 1))),
            "Q286": inverse["financial_status"][p["financial_status"]],
            "Q287": inverse["social_class"][p["social_class"]],
            "Q289": inverse["religion"][p["religion"]],
            "Q290": inverse["ethnicity"][p["ethnicity"]],
        })
    return rows


def write_sample_database(path, n: int = SAMPLE_DB_SIZE, seed: int = SAMPLE_DB_SEED) -> None:
    import csv

    rows = encode_survey_rows(sample_people(n, seed), seed + 1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SAMPLE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


# toy corpus: three communities with different education mixes
TOY_THEMES = {
    "astronomy": ((0.02, 0.05, 0.15, 0.10, 0.33, 0.20, 0.15), 70),
    "home cooking": ((0.10, 0.15, 0.30, 0.15, 0.20, 0.08, 0.02), 65),
    "esports": ((0.05, 0.25, 0.40, 0.12, 0.15, 0.03, 0.00), 65),
}
TOY_SEED = 99
_TOY_WORDS = {
    "astronomy": ["telescope", "nebula", "galaxy", "eyepiece", "aperture", "observing", "seeing", "jupiter", "saturn", "moon", "orbit", "dark", "sky", "star", "cluster", "exposure"],
    "home cooking": ["recipe", "oven", "dough", "sauce", "garlic", "simmer", "braise", "bread", "spices", "flavour", "pan", "butter", "stock", "roast", "dinner"],
    "esports": ["match", "ranked", "patch", "meta", "team", "tournament", "stream", "clutch", "aim", "map", "strategy", "season", "ladder", "roster", "scrim"],
}
_FILLER = ["i", "really", "think", "that", "this", "was", "the", "best", "part", "of", "my", "week", "and", "honestly", "it", "keeps", "getting", "better", "every", "time", "we", "try"]


def _toy_post(rng: np.random.Generator, theme: str, short: bool, url: bool) -> str:
    n = int(rng.integers(4, 12)) if short else int(rng.integers(18, 45))
    vocab = _TOY_WORDS[theme] + _FILLER
    words = [vocab[int(k)] for k in rng.integers(0, len(vocab), size=n)]
    if url:
        words.insert(int(rng.integers(0, n)), f"https://example.org/{theme.replace(' ', '-')}/{int(rng.integers(1000))}")
    return " ".join(words).capitalize() + "."


def toy_corpus(seed: int = TOY_SEED) -> tuple[list[dict], dict[str, dict[str, str]]]:
    """Posts (one dict per line) and the persona each user's posts were written from."""
    rng = np.random.default_rng(seed)
    posts: list[dict] = []
    personas: dict[str, dict[str, str]] = {}
    uid = 0
    for t_index, (theme, (weights, users)) in enumerate(TOY_THEMES.items()):
        people = sample_people(users, seed + t_index, education_weights=weights)
        for person in people:
            user_id = f"u{uid:04d}"
            uid += 1
            profile = dict(person)
            # some traits are rarely evident from posts
            for dim in ("religion", "ethnicity", "marital_status"):
                if rng.random() < 0.3:
                    profile[dim] = "Unknown"
            personas[user_id] = profile
            for _ in range(int(rng.integers(2, 9))):
                day = int(rng.integers(0, 730))
                stamp = np.datetime64("2023-01-01T00:00:00") + np.timedelta64(day * 86400 + int(rng.integers(86400)), "s")
                posts.append({
                    "user_id": user_id,
                    "timestamp": f"{stamp}Z",
                    "text": _toy_post(rng, theme, rng.random() < 0.15, rng.random() < 0.1),
                    "theme": theme,
                })
    posts.sort(key=lambda p: (p["timestamp"], p["user_id"]))
    return posts, personas


def write_toy_corpus(corpus_path, personas_path, seed: int = TOY_SEED) -> None:
    import json

    posts, personas = toy_corpus(seed)
    with open(corpus_path, "w", encoding="utf-8") as fh:
        fh.writelines(json.dumps(p, ensure_ascii=False) + "\n" for p in posts)
    with open(personas_path, "w", encoding="utf-8") as fh:
        json.dump({"profiles": personas}, fh, indent=2, ensure_ascii=False, sort_keys=True)
        fh.write("\n")
