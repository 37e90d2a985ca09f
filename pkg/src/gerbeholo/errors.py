"""Exception hierarchy shared by all modules.

Every error carries an optional ``payload`` dict with machine-readable
diagnostics (offending grid node, eigenphase, residual, ...).
"""


class GerbeholoError(Exception):
    """Base class. ``exit_code`` is what the CLI returns for it."""

    exit_code = 4

    def __init__(self, message: str, **payload):
        super().__init__(message)
        self.payload = payload


class InputError(GerbeholoError):
    exit_code = 4


class CutCollision(GerbeholoError):
    """An eigenvalue sits on (or too close to) a logarithm branch cut."""
    exit_code = 2


class UnderResolved(GerbeholoError):
    """Grid too coarse: a neighbour transition has an eigenphase near pi."""
    exit_code = 2


class NotQuantized(GerbeholoError):
    exit_code = 2


class NotEquivariant(GerbeholoError):
    exit_code = 4


class GapClosure(GerbeholoError):
    """An extension interpolant lost its spectral gap."""
    exit_code = 3


class ExtensionUnavailable(GerbeholoError):
    exit_code = 3


class GapClosedAtFermi(GerbeholoError):
    exit_code = 2


class UnstableFlow(GerbeholoError):
    exit_code = 2


class AxisInconsistent(GerbeholoError):
    exit_code = 2


class OddWinding(GerbeholoError):
    exit_code = 2


class NoGap(GerbeholoError):
    exit_code = 2


class RelationViolation(GerbeholoError):
    exit_code = 2


class OracleMismatch(GerbeholoError):
    exit_code = 2


class InadmissibleAssignment(GerbeholoError):
    exit_code = 4
