"""Exception hierarchy shared by every module in the package."""


class HintError(Exception):
    """Base class for all package errors."""


class EmptyDocument(HintError):
    """A document has no tokens left after tokenization."""


class EmptySentence(HintError):
    """Every position of a sentence is masked."""


class ConfigError(HintError):
    """Invalid configuration value, key, or file."""


class NumericalError(HintError):
    """A loss or intermediate quantity became non-finite or out of domain."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        # last good parameters, when raised from the trainer
        self.checkpoint = checkpoint
