"""Optional MLflow experiment tracking."""
