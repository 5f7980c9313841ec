"""Training-report container shared by all trainers."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

# Relative dip below which an objective step still counts as non-decreasing;
# genuine bound violations are macroscopic, this only absorbs roundoff.
MONOTONE_REL_TOL = 1e-8


@dataclass
class TrainingReport:
    """Per-iteration objective trace plus convergence bookkeeping.

    ``objective_trace[i]`` is the training objective of the parameters at the
    START of iteration i; ``final_objective`` is evaluated on the returned
    model, so resuming a run reproduces it as its first trace entry.
    """

    objective_trace: list[float] = field(default_factory=list)
    bandwidth_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    status: str = "pending"  # converged | max_iterations | timeout
    final_objective: float = np.nan
    train_seconds: float = 0.0
    min_separation: float | None = None
    initial_bandwidth: float | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def decreasing_steps(self) -> int:
        """Number of steps whose objective dropped beyond roundoff tolerance."""
        trace = list(self.objective_trace)
        if np.isfinite(self.final_objective):
            trace = trace + [self.final_objective]
        count = 0
        for prev, cur in zip(trace, trace[1:]):
            if cur < prev - MONOTONE_REL_TOL * abs(prev):
                count += 1
        return count

    @property
    def steps(self) -> int:
        """Number of objective-to-objective transitions recorded."""
        n = len(self.objective_trace)
        if np.isfinite(self.final_objective):
            n += 1
        return max(n - 1, 0)

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "objective"])
            for i, val in enumerate(self.objective_trace):
                writer.writerow([i, repr(float(val))])
            if np.isfinite(self.final_objective):
                writer.writerow([len(self.objective_trace), repr(float(self.final_objective))])
