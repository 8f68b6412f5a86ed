"""Exception types raised across plumekit."""


class PlumekitError(Exception):
    """Base class for all plumekit errors."""


# -- file formats --------------------------------------------------------

class MalformedHeader(PlumekitError, ValueError):
    pass


class TruncatedData(PlumekitError, ValueError):
    pass


class NonFiniteValue(PlumekitError, ValueError):
    pass


class IoFailure(PlumekitError, OSError):
    pass


class EmptyFile(PlumekitError, ValueError):
    pass


class UnparseableLine(PlumekitError, ValueError):
    def __init__(self, lineno, text=""):
        self.lineno = lineno
        super().__init__(f"line {lineno}: cannot parse {text!r}")


class IllegalLabel(PlumekitError, ValueError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"illegal ground-truth label {value}")


class DimensionMismatch(PlumekitError, ValueError):
    pass


# -- decomposition -------------------------------------------------------

class TooFewExtrema(PlumekitError, ValueError):
    """Signal has fewer than two extrema; it is all trend."""


class NoExtremaAnywhere(PlumekitError, ValueError):
    """No row or column of the image has two or more extrema."""


# -- classifiers ---------------------------------------------------------

class EmptySelection(PlumekitError, ValueError):
    pass


class ZeroVector(PlumekitError, ValueError):
    pass


class SingularCovariance(PlumekitError, ValueError):
    pass


class ZeroDenominator(PlumekitError, ValueError):
    pass


class DegeneratePixel(PlumekitError, ValueError):
    """Pixel equals the background mean, so ACE is 0/0."""


# -- evaluation ----------------------------------------------------------

class NoPositives(PlumekitError, ValueError):
    pass


class NoNegatives(PlumekitError, ValueError):
    pass


# -- config files --------------------------------------------------------

class UnknownKey(PlumekitError, KeyError):
    def __init__(self, key):
        self.key = key
        super().__init__(key)

    def __str__(self):
        return f"unknown key {self.key!r}"


class MissingKey(PlumekitError, KeyError):
    def __init__(self, key):
        self.key = key
        super().__init__(key)

    def __str__(self):
        return f"missing required key {self.key!r}"


class UnparseableValue(PlumekitError, ValueError):
    def __init__(self, key, text):
        self.key = key
        super().__init__(f"cannot parse value {text!r} for key {key!r}")
