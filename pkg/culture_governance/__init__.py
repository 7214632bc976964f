from .errors import CultureGovernanceError, DomainError, EstimationError, InputError

__version__ = '0.1'
