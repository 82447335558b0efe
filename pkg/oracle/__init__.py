"""Exact oracle for killed walks, ladder heights and return times."""
