"""exception hierarchy shared by the library and the CLI"""


class ReprolocateError(Exception):
    """Base class for all errors raised by reprolocate."""


class InputError(ReprolocateError):
    """Raised when user-supplied input (paths, manifests, rules files) cannot be used.  The CLI maps this to exit code 2."""


class ConfigError(InputError):
    """Raised when a configuration value is out of range or malformed."""


class RuleError(InputError):
    """Raised when a rule does not compile or collides with another rule."""


class EmptyCorpusError(InputError):
    """Raised when localization is requested over a corpus without any text documents."""


class DomainError(ReprolocateError, ValueError):
    """Raised when a numeric operation is called outside of its domain (e.g. `n_t = 0`, `alpha > 1`, empty ground truth)."""
