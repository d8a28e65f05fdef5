"""Exception hierarchy shared by all modules."""


class P2D2Error(Exception):
    """Base class for every error raised by this package."""


# topology
class DisconnectedGraph(P2D2Error):
    pass


class EmptyGraph(P2D2Error):
    pass


class InvalidCombinationMatrix(P2D2Error):
    pass


class DegenerateSpectrum(P2D2Error):
    pass


class GenerationExhausted(P2D2Error):
    pass


class NumericalFailure(P2D2Error):
    pass


# model
class DimensionMismatch(P2D2Error, ValueError):
    pass


class NotStronglyConvex(P2D2Error):
    pass


class TooFewSamples(P2D2Error):
    pass


class LibsvmParseError(P2D2Error, ValueError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# prox
class InvalidParameter(P2D2Error, ValueError):
    pass


# solver
class NonFiniteIterate(NumericalFailure):
    pass


class InvalidConfig(P2D2Error, ValueError):
    pass


class NoConvergence(NumericalFailure):
    pass


# analysis
class InvalidC(P2D2Error, ValueError):
    pass


class InvalidRho(P2D2Error, ValueError):
    pass


class StepTooLarge(P2D2Error, ValueError):
    pass


class CertificateUnavailable(P2D2Error):
    pass


class InsufficientData(P2D2Error):
    pass
