"""Command-line entry point and experiment orchestration."""
