"""Exception hierarchy shared by all modules."""


class AWError(ValueError):
    """Base class; every validation failure in the package derives from it."""


class NonProbability(AWError):
    pass


class RaggedDepth(AWError):
    pass


class ShapeMismatch(AWError):
    pass


class BadStage(AWError):
    pass


class Degenerate(AWError):
    pass


class TooLarge(AWError):
    pass


class ResolutionTooCoarse(AWError):
    pass


class InvalidParams(AWError):
    pass


class InvalidEpsilon(AWError):
    pass


class UnsupportedOrder(AWError):
    pass


class BandwidthTooSmall(AWError):
    pass


class GridTooCoarse(AWError):
    pass


class GridMismatch(AWError):
    pass


class MeshTooCoarse(AWError):
    pass


class SampleOutOfBox(AWError):
    pass
