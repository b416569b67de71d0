"""Exceptions raised by the computation modules."""


class BayesNetError(Exception):
    """Base class for all toolkit errors."""


class ModelError(BayesNetError, ValueError):
    """Invalid shape, parameters, dataset or truth/learner pairing."""


class InfeasibleError(BayesNetError):
    """A computation exceeds its configured cost bound."""


class NumericalError(BayesNetError, ArithmeticError):
    """A numerical procedure could not produce a finite answer."""
