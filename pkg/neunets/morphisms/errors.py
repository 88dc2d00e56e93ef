from neunets.errors import NeunetsError


class MorphismError(NeunetsError):
    pass


class PreconditionError(MorphismError):
    pass


class ForbiddenPositionError(PreconditionError):
    pass


class InconsistentFanOutError(MorphismError):
    pass


class MetadataMismatchError(MorphismError):
    pass
