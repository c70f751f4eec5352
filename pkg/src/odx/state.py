"""Search state tracker: iteration budget, best iterate, loss history."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SearchTracker:
    """Tracks one latent search from the initial point to the last update."""

    max_iters: int = 2000
    record_stride: int = 10

    iteration: int = 0
    best_loss: float = float("inf")
    best_iteration: int = -1
    best_z: np.ndarray | None = None
    best_parts: tuple[float, float] = (float("inf"), 0.0)
    losses: list[float] = field(default_factory=list)

    def record(self, z: np.ndarray, loss: float, distance: float, penalty: float) -> bool:
        """Log the loss at the current iterate; returns True on a new best."""
        self.losses.append(loss)
        improved = loss < self.best_loss
        if improved:
            self.best_loss = loss
            self.best_iteration = self.iteration
            self.best_z = z.copy()
            self.best_parts = (distance, penalty)
        return improved

    def advance(self) -> None:
        self.iteration += 1

    def is_done(self) -> bool:
        return self.iteration >= self.max_iters

    @property
    def iterations_run(self) -> int:
        return self.iteration

    def trajectory(self) -> list[tuple[int, float]]:
        """Stride samples plus the best and the final iterate, in order."""
        last = len(self.losses) - 1
        stride = max(1, self.record_stride)
        keep = {i for i in range(0, last + 1, stride)}
        keep.update({last, self.best_iteration})
        return [(i, self.losses[i]) for i in sorted(keep) if 0 <= i <= last]
