class CultureGovernanceError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 3


class InputError(CultureGovernanceError, ValueError):
    """Bad input files, rows, headers or configuration."""

    exit_code = 1


class DomainError(CultureGovernanceError, ValueError):
    """Parameters or data outside the domain of a computation."""

    exit_code = 1


class EstimationError(CultureGovernanceError, RuntimeError):
    """A fit could not produce a result."""

    exit_code = 2


def exit_code_for(exc):
    if isinstance(exc, CultureGovernanceError):
        return exc.exit_code
    return 3
