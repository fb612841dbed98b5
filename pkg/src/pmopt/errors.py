"""Exception types shared across the package."""


class PmoptError(Exception):
    """Base class for all package errors."""


# -- linear algebra ---------------------------------------------------------

class NotSPD(PmoptError):
    """Matrix is not symmetric positive definite (pivot <= 1e-12)."""


class DimensionMismatch(PmoptError):
    """Operand dimensions do not agree."""


# -- data / predictors ------------------------------------------------------

class DegenerateFeature(PmoptError):
    """A feature column is constant and cannot be min-max scaled."""


class TooFewRows(PmoptError):
    """Dataset too small for the requested split."""


class DivergedTraining(PmoptError):
    """Training loss became non-finite."""


class ConstantTruth(PmoptError):
    """R^2 is undefined for a constant truth vector."""


# -- optimization model -----------------------------------------------------

class InvertedBounds(PmoptError):
    """Variable lower bound exceeds its upper bound."""


class UnknownVariable(PmoptError):
    """Constraint or objective references an undeclared variable id."""


class SecondQuadratic(PmoptError):
    """A model supports at most one quadratic constraint."""


# -- encoders ----------------------------------------------------------------

class EmptyForest(PmoptError):
    """Cannot encode a forest with no trees."""


class UnboundedNeuron(PmoptError):
    """Interval propagation produced non-finite neuron bounds."""


class MissingXVars(PmoptError):
    """Relevance constraints need registered decision variables."""


class KOutOfRange(PmoptError):
    """K must satisfy 1 <= K <= number of reference points."""


class InfeasibleRelevance(PmoptError):
    """Relevance parameters admit no feasible point."""


# -- solver -------------------------------------------------------------------

class NumericalBreakdown(PmoptError):
    """Simplex could not find an acceptable pivot."""


class ZeroGradient(PmoptError):
    """Analytic ellipsoid oracle needs a nonzero objective gradient."""


class TooManyTuples(PmoptError):
    """Brute-force leaf enumeration would exceed its tuple budget."""


# -- experiments / io ---------------------------------------------------------

class MissingCell(PmoptError):
    """Aggregation is missing a required scenario cell."""


class NonPositiveBaseline(PmoptError):
    """Improvement percentage needs a positive unconstrained mean."""


class ParseError(PmoptError):
    """Tabular file could not be parsed; message carries row/column."""


class MissingTarget(PmoptError):
    """Target column absent from a tabular file."""


class ConfigError(PmoptError):
    """Run configuration failed schema validation."""
