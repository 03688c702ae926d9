"""
Realized production strategies.

A ModeSchedule is the daily mode path μ_0..μ_{N-1} chosen by one controller
on one flow path, with its switch events and realized payoff. Day numbers in
events are 1-based calendar days of the year (the "Day of action" convention).
"""

from __future__ import annotations

from pydantic import Field, model_validator

from app.v1.models.base import DomainModel

START_MODE = 0


class SwitchEvent(DomainModel):
    """One change of production mode."""

    day: int = Field(ge=1, description="1-based day of action")
    from_mode: int = Field(ge=0)
    to_mode: int = Field(ge=0)
    cost: float = Field(description="Switching cost paid, m.u.")

    def __str__(self) -> str:
        return f"({self.day},{self.to_mode})"


class ModeSchedule(DomainModel):
    """
    Mode path of one strategy over one year.

    The plant starts in mode 0; ``realized_payoff`` is the discretized payoff
    of ``modes`` including every switching cost.
    """

    strategy: str = Field(description="pde, naive or hindsight")
    modes: tuple[int, ...]
    events: tuple[SwitchEvent, ...]
    realized_payoff: float = Field(description="m.u.")
    forecast_days: int = Field(default=0, ge=0, description="l")
    relaxation_days: int = Field(default=0, ge=0, description="ℓ")
    cost_ratio: float | None = Field(default=None, description="C/D, when costs were built from it")
    year: int | None = None

    @model_validator(mode="after")
    def _check_events(self) -> ModeSchedule:
        previous = START_MODE
        changes = []
        for n, mode in enumerate(self.modes):
            if mode != previous:
                changes.append((n + 1, previous, mode))
            previous = mode
        recorded = [(e.day, e.from_mode, e.to_mode) for e in self.events]
        if changes != recorded:
            raise ValueError("switch events do not match the mode path")
        return self

    @property
    def n_days(self) -> int:
        return len(self.modes)

    @property
    def events_table(self) -> str:
        """Events as ``(day,mode) (day,mode) ...``."""
        return " ".join(str(e) for e in self.events)


class EvaluationResult(DomainModel):
    """
    Strategies scored on one year.

    ``gammas[name] = payoffs[name] / D``. The hindsight optimum bounds every
    other strategy on the same path.
    """

    year: int | None
    capacity_benchmark: float = Field(gt=0.0, description="D, m.u.")
    payoffs: dict[str, float]
    gammas: dict[str, float]

    @model_validator(mode="after")
    def _check_dominance(self) -> EvaluationResult:
        best = self.payoffs.get("hindsight")
        if best is None:
            return self
        for name, payoff in self.payoffs.items():
            if payoff > best:
                raise ValueError(f"strategy {name} beats the hindsight optimum ({payoff} > {best})")
        return self
