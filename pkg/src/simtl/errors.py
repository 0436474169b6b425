"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operands have incompatible lengths or shapes."""


class DomainError(ValueError):
    """An input lies outside the domain of a function (e.g. log of a nonpositive loss)."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class EvaluationError(ArithmeticError):
    """A function evaluation produced a non-finite value."""

    def __init__(self, message, task=None):
        super().__init__(message)
        self.task = task


class DivergenceError(RuntimeError):
    """A training run produced a non-finite loss or gradient."""

    def __init__(self, step, task, message="", seed=None):
        self.step = step
        self.task = task
        self.seed = seed
        self.records = []
        detail = f"diverged at step {step}, task {task}"
        if seed is not None:
            detail += f", seed {seed}"
        if message:
            detail += f": {message}"
        super().__init__(detail)


class ConfigError(ValueError):
    """Invalid experiment configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)
