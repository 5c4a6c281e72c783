"""Exception types shared across the package.

ContractError maps to CLI exit code 2, MediaIOError to exit code 3.
"""


class ContractError(ValueError):
    """A caller violated a documented precondition."""


class MediaIOError(IOError):
    """A file could not be read, decoded, or written."""
