"""Per-attack metrics collection and run reporting."""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field


@dataclass
class AttackMetric:
    """Metrics for a single attack on one target (and class)."""

    index: int
    y: int | None = None
    wall_time: float = 0.0
    iterations: int = 0
    mse: float = 0.0
    mse_relaxed: float = 0.0
    p_value: float = 0.0
    accepted: bool = False


@dataclass
class MetricsCollector:
    """Collects and reports metrics across an evaluation run."""

    label: str = "evaluate"
    attacks: list[AttackMetric] = field(default_factory=list)
    run_start: float = field(default_factory=time.time)

    def record(self, metric: AttackMetric) -> None:
        self.attacks.append(metric)

    @property
    def total_wall_time(self) -> float:
        return time.time() - self.run_start

    @property
    def accepted(self) -> int:
        return sum(1 for a in self.attacks if a.accepted)

    @property
    def rejected(self) -> int:
        return len(self.attacks) - self.accepted

    @property
    def total_iterations(self) -> int:
        return sum(a.iterations for a in self.attacks)

    @property
    def mean_mse(self) -> float:
        return sum(a.mse for a in self.attacks) / max(len(self.attacks), 1)

    def print_attack_summary(self, m: AttackMetric) -> None:
        status = "PASS" if m.accepted else "FAIL"
        cls = f" y={m.y}" if m.y is not None else ""
        print(
            f"  Attack {m.index:3d}{cls}: [{status}] "
            f"{m.wall_time:5.1f}s it={m.iterations} "
            f"mse={m.mse:.6f} mse*={m.mse_relaxed:.6f} p={m.p_value:.3f}",
            file=sys.stderr,
        )

    def print_report(self) -> None:
        out = sys.stderr
        print("\n" + "=" * 60, file=out)
        print(f"  {self.label.upper()} RESULTS", file=out)
        print("=" * 60, file=out)
        for m in self.attacks:
            self.print_attack_summary(m)
        print("-" * 60, file=out)
        print(f"  Passed gate: {self.accepted}/{len(self.attacks)}", file=out)
        print(f"  Mean MSE: {self.mean_mse:.6f}", file=out)
        print(f"  Iterations: {self.total_iterations}", file=out)
        print(f"  Total time: {self.total_wall_time:.1f}s", file=out)
        avg = self.total_wall_time / max(len(self.attacks), 1)
        print(f"  Avg time/attack: {avg:.1f}s", file=out)
        print("=" * 60 + "\n", file=out)
