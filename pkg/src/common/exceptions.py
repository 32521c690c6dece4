class LiftException(Exception):
    def __init__(self, detail: str = "Lift computation failed"):
        super().__init__(detail)
        self.detail = detail


class InvalidInputException(LiftException):
    def __init__(self, detail: str = "Invalid input"):
        super().__init__(detail)


class ConfigException(LiftException):
    def __init__(self, detail: str = "Invalid experiment config"):
        super().__init__(detail)


class ConstantRankViolationException(LiftException):
    def __init__(self, detail: str = "Defining function lost constant rank"):
        super().__init__(detail)


class RetractionFailureException(LiftException):
    def __init__(self, detail: str = "Projection onto the manifold did not converge"):
        super().__init__(detail)


class NotCoexactException(LiftException):
    def __init__(self, detail: str = "Vector is not orthogonal to im L"):
        super().__init__(detail)


class NotSubmersionException(LiftException):
    def __init__(self, detail: str = "Map is not a submersion at this point"):
        super().__init__(detail)


class NoDegeneracyException(LiftException):
    def __init__(self, detail: str = "Point has no degenerate directions"):
        super().__init__(detail)


class NoPathologyException(LiftException):
    def __init__(self, detail: str = "Lift is open at this point"):
        super().__init__(detail)


class SamplerExhaustedException(LiftException):
    def __init__(self, detail: str = "Sampler produced no usable points"):
        super().__init__(detail)


class WitnessSearchFailedException(LiftException):
    def __init__(self, detail: str = "No witness cost found"):
        super().__init__(detail)


class InvalidWitnessException(LiftException):
    def __init__(self, detail: str = "Witness precondition violated"):
        super().__init__(detail)


class NoDataException(LiftException):
    def __init__(self, detail: str = "Report has no data for this task"):
        super().__init__(detail)


class NotConvergedException(LiftException):
    def __init__(
            self,
            detail: str = "Solver did not converge",
            best_point=None,
            certificate=None,
    ):
        super().__init__(detail)
        self.best_point = best_point
        self.certificate = certificate
