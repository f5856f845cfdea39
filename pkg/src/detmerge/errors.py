"""Exception hierarchy shared by every module."""


class DetMergeError(Exception):
    pass


class MalformedInput(DetMergeError, ValueError):
    pass


class UnknownRegime(MalformedInput):
    pass


class DegenerateDistribution(DetMergeError, ValueError):
    pass


class InsufficientPoints(DetMergeError, ValueError):
    pass


class InsufficientMembers(DetMergeError, ValueError):
    pass


class NotSingleSample(DetMergeError, ValueError):
    pass


class EmptyClass(DetMergeError, ValueError):
    """Raised by a metric when the correct or incorrect set it needs is empty."""


class OverlapAmbiguity(DetMergeError, ValueError):
    pass


class EmptyCorpus(DetMergeError, ValueError):
    pass
