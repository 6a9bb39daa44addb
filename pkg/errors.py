class MTLError(Exception):
    """Base class for every error raised by the model-checking toolkit"""


class EmptyInterval(MTLError):
    """Interval bounds describe the empty set"""


class UnboundedWindow(MTLError):
    """A temporal window with an infinite upper bound reached a finite trace"""


class HorizonExceeded(MTLError):
    """The formula needs more of the trace than the trace holds"""

    def __init__(self, required, available):
        self.required = required
        self.available = available
        super().__init__(
            f"formula window needs the trace up to t={required}, "
            f"but the trace ends at t={available}"
        )


class UnknownAtom(MTLError):
    """An atom name is not declared in the atom map"""

    def __init__(self, name):
        self.name = name
        super().__init__(f"atom '{name}' is not declared in the atom map")


class NotPropositional(MTLError):
    """A temporal operator appeared where a propositional formula is required"""


class ParseError(MTLError):
    """Formula or notation text could not be parsed"""

    def __init__(self, message, offset=None, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = message
        if offset is not None:
            detail += f" at byte {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class OffGrid(MTLError):
    """A time passed to the discrete evaluator does not lie on the grid N/n"""


class FormatError(MTLError):
    """Malformed trace or atom-map file"""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class NonFiniteState(MTLError):
    """Drift or diffusion returned a non-finite value during simulation"""


class DomainError(MTLError, ValueError):
    """Arguments outside the domain of a closed-form oracle"""


class ConfigError(MTLError):
    """An environment setting could not be interpreted"""
