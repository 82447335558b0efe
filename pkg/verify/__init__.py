"""Verification checks and the report they build."""
