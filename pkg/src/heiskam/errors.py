"""Exception types shared across modules.

``exit_code`` is what the command-line front end returns when the error
escapes a subcommand.
"""


class HeisKamError(Exception):
    exit_code = 5


class InputError(HeisKamError):
    """Data violates an operation's precondition."""

    exit_code = 2


class NonZeroMean(InputError):
    pass


class NotOrthogonal(InputError):
    pass


class DegeneratePair(InputError):
    pass


class DiophantineFailure(InputError):
    pass


class CocycleViolation(InputError):
    pass


class ObstructionNonzero(CocycleViolation):
    pass


class NotACochain(InputError):
    pass


class ConstraintViolated(InputError):
    pass


class CompatibilityViolation(InputError):
    pass


class NotInAnnihilator(InputError):
    pass


class NontrivialClass(InputError):
    pass


class ResolutionExceeded(InputError):
    pass


class StencilTooCoarse(InputError):
    pass


class DegenerateProjection(HeisKamError):
    pass


class AliasingExceeded(HeisKamError):
    pass


class InversionDiverged(HeisKamError):
    pass


class NoConvergence(HeisKamError):
    """Iteration stopped without meeting its target; ``trace`` keeps the history."""

    exit_code = 3

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NewtonDiverged(NoConvergence):
    pass


class OutOfBall(NoConvergence):
    pass


class StepInadmissible(HeisKamError):
    exit_code = 4

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class AliasRisk(UserWarning):
    """Sample grid is too coarse to resolve every mode of the requested cutoff."""
