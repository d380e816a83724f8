"""Replay a trace through the protocol and check the guarantees step by step."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .adversary import Delete, Trace
from .graph import ForgivingGraph
from .metrics import MetricsReport, check_structure, check_theorem
from .netsim import ROUND_CONST, RecoveryStats, run_recovery


@dataclass
class RunResult:
    seed: int
    fg: ForgivingGraph
    reports: list[MetricsReport] = field(default_factory=list)
    recoveries: list[RecoveryStats] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    failed_step: int | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> dict:
        stretches = [r.stretch_max for r in self.reports if r.stretch_max is not None]
        return {
            "seed": self.seed,
            "steps": len(self.reports) - 1 if self.reports else 0,
            "degree_ratio_max": max((r.degree_ratio_max for r in self.reports), default=0.0),
            "stretch_max": max(stretches, default=None),
            "messages_total": sum(s.messages_total for s in self.recoveries),
            "rounds_max": max((s.rounds for s in self.recoveries), default=0),
            "deletions": len(self.recoveries),
            "violations": list(self.violations),
        }

    def to_json(self) -> str:
        doc = {"seed": self.seed, "summary": self.summary(), "steps": [r.row() for r in self.reports]}
        return json.dumps(doc, indent=1, allow_nan=True) + "\n"


def run_trace(
    trace: Trace,
    check: str = "step",
    round_const: float = ROUND_CONST,
    stretch_limit: int | None = None,
    structure: bool = False,
    stop_on_failure: bool = False,
    degree_factor: int = 3,
) -> RunResult:
    """Execute ``trace`` and evaluate the guarantees.

    ``check="step"`` measures after every action, ``"final"`` only at the
    end (recovery cost bounds are still checked on every deletion).  Stretch
    is skipped on steps where |G'| exceeds ``stretch_limit``.  With
    ``structure`` the helper-count, RT-validity and representative checks run
    too.
    """
    if check not in ("step", "final"):
        raise ValueError(f"unknown check level {check!r}")
    trace.validate()
    fg = ForgivingGraph.from_edges(trace.initial_graph)
    result = RunResult(trace.seed, fg)

    def measure(step: int, stats: RecoveryStats | None) -> None:
        stretch = stretch_limit is None or len(fg.gprime) <= stretch_limit
        report = check_theorem(fg, step, stats, stretch=stretch, degree_factor=degree_factor)
        if stats is not None:
            report.violations.extend(stats.violations(round_const))
        if structure:
            report.violations.extend(check_structure(fg))
            report.violations.extend(fg.repair_violations)
            fg.repair_violations.clear()
        result.reports.append(report)
        for v in report.violations:
            result.violations.append(f"step {step}: {v}")
        if report.violations and result.failed_step is None:
            result.failed_step = step

    total = len(trace.actions)
    if check == "step" or total == 0:
        measure(0, None)
    for step, act in enumerate(trace.actions, start=1):
        stats = None
        if isinstance(act, Delete):
            stats = run_recovery(fg, act.id)
            result.recoveries.append(stats)
        else:
            fg.init_processor(act.id, act.neighbors)
        if check == "step" or step == total:
            measure(step, stats)
        elif stats is not None:
            for v in stats.violations(round_const):
                result.violations.append(f"step {step}: {v}")
                if result.failed_step is None:
                    result.failed_step = step
        if stop_on_failure and result.failed_step is not None:
            break
    return result
