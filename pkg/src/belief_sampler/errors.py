"""Exception hierarchy shared by every module.

All validation failures derive from :class:`ValidationError` so the CLI can
map them to a single exit code.
"""


class ValidationError(ValueError):
    """Raised when user-supplied model, network or config data is malformed."""


class NonPositiveEntry(ValidationError):
    def __init__(self, agent, state, signal, value=None):
        self.agent, self.state, self.signal, self.value = agent, state, signal, value
        super().__init__(
            f"likelihood entry for agent {agent}, state {state}, signal {signal} "
            f"must be > 0 (got {value!r})"
        )


class RowSumMismatch(ValidationError):
    def __init__(self, agent, state, total):
        self.agent, self.state, self.total = agent, state, total
        super().__init__(
            f"likelihood row for agent {agent}, state {state} sums to {total!r}, not 1"
        )


class DimensionMismatch(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class NotAProbabilityVector(ValidationError):
    pass


class BetaOutOfRange(ValidationError):
    def __init__(self, beta, kl):
        self.beta, self.kl = beta, kl
        super().__init__(f"decay target beta={beta!r} must lie in (0, KL={kl!r})")


class NotRowStochastic(ValidationError):
    def __init__(self, row, total):
        self.row, self.total = row, total
        super().__init__(f"row {row} of the weight matrix sums to {total!r}, not 1")


class ZeroDiagonal(ValidationError):
    def __init__(self, agent):
        self.agent = agent
        super().__init__(f"agent {agent} has no self-confidence (a_ii must be > 0)")


class NotStronglyConnected(ValidationError):
    def __init__(self, source, target):
        self.source, self.target = source, target
        super().__init__(f"agent {target} is unreachable from agent {source}")


class EmptyExpertSet(ValidationError):
    def __init__(self, theta):
        self.theta = theta
        super().__init__(f"no agent can distinguish state {theta} from the true state")


class GenerationBudgetExceeded(RuntimeError):
    pass


class WeightMismatch(ValidationError):
    pass


class NotIdentifiable(ValidationError):
    def __init__(self, agent, theta):
        self.agent, self.theta = agent, theta
        super().__init__(
            f"state {theta} is observationally equivalent to the true state for agent {agent}"
        )


class InsufficientEnsemble(ValidationError):
    pass


class ConfigError(ValidationError):
    pass
