"""Bundled schema, harmonization table, sample database and toy corpus."""
