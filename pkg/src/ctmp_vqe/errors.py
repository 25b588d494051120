"""Exception hierarchy shared by all modules."""


class CtmpVqeError(Exception):
    """Base class for package errors."""


class SizeError(CtmpVqeError, ValueError):
    """A qubit count or dimension is outside the supported range."""


class ShapeError(CtmpVqeError, ValueError):
    """Two objects disagree on their number of qubits."""


class ValidityError(CtmpVqeError, ValueError):
    """An object violates one of its invariants (e.g. a non-Hermitian observable)."""


class IncompleteCalibrationError(CtmpVqeError, ValueError):
    """Calibration data does not contain every 2-bit input pattern for a pair."""


class FitError(CtmpVqeError, ArithmeticError):
    """The matrix logarithm of a pair assignment matrix could not be taken."""


class StaleModelError(CtmpVqeError, RuntimeError):
    """A model's cached gamma no longer matches its terms."""


class ConfigError(CtmpVqeError, ValueError):
    """An experiment configuration is invalid.

    ``problems`` lists every violated field so callers can report them all at once.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ArgumentError(CtmpVqeError, ValueError):
    """A call received arguments it cannot act on (e.g. a distance from a qubit to itself)."""
