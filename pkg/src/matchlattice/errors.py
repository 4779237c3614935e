"""Exception types shared across the package."""


class MatchLatticeError(Exception):
    """Base class for all domain errors."""


class UnknownAgent(MatchLatticeError):
    """An offered set contains an id outside a choice function's ground set."""


class CapExceeded(MatchLatticeError):
    """An exhaustive check was refused because the relevant set is too large."""


class ParseError(MatchLatticeError):
    """Input file is not valid JSON."""


class SchemaError(MatchLatticeError):
    """Input JSON does not match the documented schema."""


class ReferentialIntegrity(MatchLatticeError):
    """A preference or choice function references an agent that does not exist."""


class NotStable(MatchLatticeError):
    """An operation required a stable matching and got something else."""


class NotWorkerQuasiStable(MatchLatticeError):
    """An operation required a worker-quasi-stable matching."""


class NotFirmQuasiStable(MatchLatticeError):
    """An operation required a firm-quasi-stable matching."""


class NonConvergence(MatchLatticeError):
    """Fixed-point iteration exceeded its step cap or broke an invariant.

    Seeing this on a market that passed validation would be a bug; in
    practice it signals a non-substitutable market slipped past validation.
    """


class BudgetExceeded(MatchLatticeError):
    """Exhaustive enumeration would exceed the configured budget."""


class GenerationFailed(MatchLatticeError):
    """Random market generation exhausted its rejection-sampling retries."""


class PreimageNotStable(MatchLatticeError):
    """The canonical preimage of a stable matching failed its stability check.

    Unreachable for valid inputs; raised instead of silently returning a
    wrong witness.
    """
