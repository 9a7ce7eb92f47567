"""
Error types for the observer toolkit
Every error carries the CLI exit code it maps to
"""


class ObserverError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 1


class InputError(ObserverError):
    """Malformed input data: bad CSV, wrong dimensions, invalid weights"""

    exit_code = 2


class InfeasibleError(ObserverError):
    """The requested observer does not exist for this DAE"""

    exit_code = 3


class NotImpulseObservableError(InfeasibleError):
    """Worst-case error is infinite on every finite horizon"""

    def __init__(self, functional: str, message: str = ""):
        self.functional = functional
        super().__init__(
            message
            or f"functional {functional} is not l-impulse observable: worst-case error infinite"
        )


class NotDetectableError(InfeasibleError):
    """No infinite-horizon observer with finite worst-case error exists"""

    def __init__(self, functional: str, message: str = ""):
        self.functional = functional
        super().__init__(
            message
            or (
                f"functional {functional} is not l-detectable; detectability is necessary "
                "and sufficient for an infinite-horizon minimax observer"
            )
        )


class NumericalError(ObserverError):
    """A factorization, Riccati solve or integration failed numerically"""

    exit_code = 4
