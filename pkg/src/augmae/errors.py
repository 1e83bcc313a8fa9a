"""Exception types raised across the package."""


class AugMaeError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(AugMaeError, ValueError):
    pass


class DomainError(AugMaeError, ValueError):
    pass


class DegenerateInputError(AugMaeError, ValueError):
    pass


class ContractError(AugMaeError, ValueError):
    """A caller violated a documented precondition."""


class ConfigError(AugMaeError, ValueError):
    pass


class RangeError(AugMaeError, ValueError):
    pass


class ParseError(AugMaeError, ValueError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class EmptyMaskError(ContractError):
    pass


class SplitError(ContractError):
    pass


class PreconditionError(ContractError):
    """A bound instance does not satisfy the structural invariants the inequalities rely on."""


class NonFiniteLossError(AugMaeError, RuntimeError):
    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot or {}
