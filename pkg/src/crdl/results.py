"""Shared result and schedule types."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Schedule:
    mode: str = "synchronous"
    damping: float = 0.0
    max_iter: int = 10000
    tol: float = 1e-8

    def __post_init__(self):
        if self.mode not in ("synchronous", "sequential"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.tol <= 0.0:
            raise ValueError("tolerance must be positive")


@dataclass
class InferenceResult:
    """Point probability or probability interval, with convergence metadata."""

    probability: float | None = None
    interval: tuple[float, float] | None = None
    iterations: int = 0
    converged: bool = True
    residual: float = 0.0
    engine: str = ""
    n: object = None
    warnings: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def value(self):
        return self.probability if self.interval is None else self.interval
