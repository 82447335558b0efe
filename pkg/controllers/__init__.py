"""Controller package for Skewalk: task pipeline and run orchestration."""
