"""Exception types raised by the factorization pipeline."""


class HaarFactorError(Exception):
    """Base class for all package errors."""


class ShapeMismatchError(HaarFactorError, ValueError):
    pass


class NotFaithfulError(HaarFactorError, ValueError):
    pass


class EmptyBlockError(HaarFactorError, ValueError):
    def __init__(self, interval, message=None):
        self.interval = interval
        super().__init__(message or f"block for {interval} is empty")


class PigeonholeFailure(HaarFactorError):
    """No bin holds enough root-chain entries; the caller must raise ntilde."""


class SearchExhausted(HaarFactorError):
    def __init__(self, result):
        self.result = result
        super().__init__(
            f"no admissible sign pattern within {result.tries_used} tries "
            f"(best offdiag={result.offdiag_max:.3g}, diag dev={result.diag_dev_max:.3g})"
        )


class NeumannError(HaarFactorError):
    """Perturbation too large for Neumann-series inversion (q >= 1)."""


class DiagonalError(HaarFactorError, ValueError):
    """Operator does not have the required large diagonal."""
