"""Environment-backed settings for the toolkit."""
