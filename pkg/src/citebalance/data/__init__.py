"""Bundled reference tables (nicknames, synthetic given names)."""
