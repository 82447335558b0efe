"""Model package for Skewalk: laws, configuration and shared vocabulary."""
