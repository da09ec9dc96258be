"""Exception hierarchy shared by every package.

Input problems are ``ValueError`` subclasses, numerical or geometric failures
are ``RuntimeError`` subclasses. The CLI maps them to exit codes.
"""


class CsepError(Exception):
    """Base class for all errors raised by this project."""


class DuplicateSystem(CsepError, ValueError):
    """Two subsystems share a name."""


class UnknownSystem(CsepError, ValueError):
    """A named subsystem does not exist on the operator."""


class BadPermutation(CsepError, ValueError):
    """A requested order is not a permutation of the current systems."""


class DimMismatch(CsepError, ValueError):
    """Shapes or subsystem dimensions do not line up."""


class BadIndex(CsepError, ValueError):
    """Index outside its allowed range."""


class NotUnitary(CsepError, ValueError):
    """Matrix expected to be unitary is not."""


class BadParameter(CsepError, ValueError):
    """Numeric parameter outside its domain."""


class InvalidEnsemble(CsepError, ValueError):
    """Channel ensemble weights or Choi matrices are invalid."""


class NotAGroup(CsepError, ValueError):
    """Unitary set is not closed under multiplication up to phase."""


class NotIrreducible(CsepError, ValueError):
    """Unitary representation is reducible."""


class DegenerateReference(CsepError, ValueError):
    """Reference operator is not strictly inside the polytope."""


class BadRadius(CsepError, ValueError):
    """Approximation radius outside (0, 1]."""


class NotATester(CsepError, ValueError):
    """Operators fail the tester constraints of their scenario."""


class ConfigError(CsepError, ValueError):
    """Settings or run configuration could not be parsed."""


class BadReport(CsepError, ValueError):
    """Report file is corrupt or has an unknown schema."""


class SizeOverflow(CsepError, RuntimeError):
    """A PSD block would exceed the configured size cap."""

    def __init__(self, side, cap=None):
        self.side = side
        self.cap = cap
        message = f"block side {side} exceeds the size cap"
        if cap is not None:
            message += f" of {cap}"
        super().__init__(message)

    def __reduce__(self):
        return self.__class__, (self.side, self.cap)


class InfeasibleParty(CsepError, RuntimeError):
    """A party's constrained state space is empty."""


class GeometryError(CsepError, RuntimeError):
    """Facet enumeration of a polytope failed."""


class SolverFailure(CsepError, RuntimeError):
    """A solve finished without an optimal status."""

    def __init__(self, status, context=''):
        self.status = status
        self.context = context
        text = f"solver returned {getattr(status, 'value', status)}"
        if context:
            text = f"{context}: {text}"
        super().__init__(text)

    def __reduce__(self):
        return self.__class__, (self.status, self.context)
