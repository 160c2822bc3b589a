class DuotocError(Exception):
    """Base class for errors raised by this package."""


class NonUnitary(DuotocError):
    def __init__(self, deviation):
        self.deviation = deviation
        super().__init__(f"matrix is not unitary (max |U^dag U - 1| = {deviation:.3e})")


class NonHermitian(DuotocError):
    pass


class DimensionMismatch(DuotocError):
    pass


class OutOfBudget(DuotocError):
    pass


class Undefined(DuotocError):
    pass


class Infeasible(DuotocError):
    pass


class InsufficientAmplitudes(DuotocError):
    pass


class InsufficientPoints(DuotocError):
    pass
