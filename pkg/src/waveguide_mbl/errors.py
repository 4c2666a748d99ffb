"""Exception types shared across the package.

The CLI maps these onto exit codes: config errors -> 2, capacity
errors -> 3, numerical failures -> 4.
"""


class DomainError(ValueError):
    """An argument violates an operation's preconditions."""


class CapacityError(RuntimeError):
    """A requested object would exceed the configured memory budget."""


class NumericalError(RuntimeError):
    """A solver produced results outside its accuracy contract."""


class ConfigError(ValueError):
    """An experiment configuration failed schema validation."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
