"""Model, divergence, coefficient and evidence computations."""
