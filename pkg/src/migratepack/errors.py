"""Exception types shared by every module."""


class MigratePackError(ValueError):
    pass


class InfeasibleRow(MigratePackError):
    pass


class CapTooSmall(MigratePackError):
    pass


class AlphaTooLarge(MigratePackError):
    pass


class BudgetTooSmall(MigratePackError):
    pass


class PreconditionViolated(MigratePackError):
    pass


class ExplosionGuard(MigratePackError):
    pass


class SlotShortfall(MigratePackError):
    pass


class TooFewItems(MigratePackError):
    pass


class PhaseError(MigratePackError):
    pass


class BadEpsilon(MigratePackError):
    pass


class DivisibilityError(MigratePackError):
    pass


class TooLarge(MigratePackError):
    pass


class BadRange(MigratePackError):
    pass
