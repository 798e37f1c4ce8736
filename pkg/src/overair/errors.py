from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from pydantic import ValidationError

    from overair.models.protocol import ScheduleVerdict


class OverairError(RuntimeError):
    """Base class for every error raised by overair."""


class TopologyError(OverairError):
    pass


class BaseDisconnected(TopologyError):
    def __init__(self, n_agents: int, components: int) -> None:
        self.n_agents = n_agents
        self.components = components
        super().__init__(f"base graph on {n_agents} agents has {components} connected components")


class CertificationFailed(TopologyError):
    def __init__(self, *, window_start: int, attempts: int) -> None:
        self.window_start = window_start
        self.attempts = attempts
        super().__init__(
            f"window starting at step {window_start} not jointly connected after {attempts} attempts"
        )


class ChannelError(OverairError):
    pass


class DimensionMismatch(ChannelError):
    def __init__(self, *, expected: int, got: int, what: str) -> None:
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected dimension {expected}, got {got}")


class NegativeStateUnderAbortPolicy(ChannelError):
    def __init__(self, *, agent: int, value: float, step: int | None = None) -> None:
        self.agent = agent
        self.value = value
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"agent {agent} would transmit negative state {value!r}{where}")


class ScheduleError(OverairError):
    pass


class InadmissibleSchedule(ScheduleError):
    def __init__(self, verdict: ScheduleVerdict) -> None:
        self.verdict = verdict
        super().__init__(f"{verdict.mode}:{verdict.code}: {verdict.message}")


class DivisionNearZero(OverairError):
    def __init__(self, *, agent: int, denominator: float) -> None:
        self.agent = agent
        self.denominator = denominator
        super().__init__(f"agent {agent}: denominator {denominator!r} below division guard")


class NotSymmetric(OverairError):
    def __init__(self, max_asymmetry: float) -> None:
        self.max_asymmetry = max_asymmetry
        super().__init__(f"matrix is not symmetric (max |L - L^T| = {max_asymmetry:.3e})")


class BoundHorizonTooSmall(OverairError):
    def __init__(self, *, horizon: int, reason: str) -> None:
        self.horizon = horizon
        self.reason = reason
        super().__init__(f"horizon {horizon} too small to bound products: {reason}")


class ScenarioMismatch(OverairError):
    def __init__(self, differing: list[str], sweep: str) -> None:
        self.differing = differing
        self.sweep = sweep
        super().__init__(
            f"scenarios differ outside swept field {sweep!r}: {', '.join(differing) or 'none'}"
        )


class ScenarioConfigError(OverairError):
    def __init__(self, *, source: str, errors: list[dict[str, Any]]) -> None:
        self.source = source
        self.errors = errors
        fields = ", ".join(error["field"] for error in errors) or "none"
        super().__init__(f"invalid scenario {source}: fields={fields}")

    @classmethod
    def from_validation_error(cls, source: str, exc: ValidationError) -> ScenarioConfigError:
        errors = [
            {
                "field": ".".join(str(part) for part in error["loc"]),
                "message": error["msg"],
            }
            for error in exc.errors()
        ]
        return cls(source=source, errors=errors)

    def as_dict(self) -> dict[str, object]:
        return {"source": self.source, "errors": self.errors}
