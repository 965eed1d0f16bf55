"""Rewrite the bundled sample database and toy corpus from their fixed seeds."""

from pathlib import Path

from hag import synthetic

DATA = Path(__file__).resolve().parents[1] / "src" / "hag" / "data"

if __name__ == "__main__":
    synthetic.write_sample_database(DATA / "sample_db.csv")
    synthetic.write_toy_corpus(DATA / "toy_corpus.jsonl", DATA / "toy_personas.json")
    print(f"wrote bundled data under {DATA}")
