"""Disk I/O for Skewalk: configs, pmf files, tables and charts."""
