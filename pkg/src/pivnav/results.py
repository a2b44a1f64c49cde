"""Success-rate tables, episode logs, CSV output, and trend assertions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .planner import EpisodeResult


def binomial_halfwidth(successes: int, trials: int) -> float:
    """95% normal-approximation half-width for a binomial rate."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    return 1.96 * math.sqrt(p * (1.0 - p) / trials)


@dataclass
class Cell:
    condition: str
    sweep_value: str
    successes: int = 0
    trials: int = 0

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    @property
    def ci_half(self) -> float:
        return binomial_halfwidth(self.successes, self.trials)


@dataclass
class ResultsTable:
    name: str
    cells: list[Cell] = field(default_factory=list)

    def add(self, condition: str, sweep_value, successes: int, trials: int) -> Cell:
        if trials <= 0:
            raise ValueError("a table cell needs at least one trial")
        cell = Cell(condition, str(sweep_value), successes, trials)
        self.cells.append(cell)
        return cell

    def cell(self, condition: str, sweep_value) -> Cell:
        for c in self.cells:
            if c.condition == condition and c.sweep_value == str(sweep_value):
                return c
        raise KeyError(f"no cell ({condition}, {sweep_value}) in table {self.name}")

    def lines(self) -> list[str]:
        out = ["table,condition,sweep,successes,trials,rate,ci_half"]
        for c in self.cells:
            out.append(
                f"{self.name},{c.condition},{c.sweep_value},{c.successes},{c.trials},"
                f"{c.rate:.4f},{c.ci_half:.4f}"
            )
        return out


def write_table(table: ResultsTable, path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(table.lines()) + "\n")
    return out


def parse_table(text: str) -> ResultsTable:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header, rows = lines[0], lines[1:]
    if header != "table,condition,sweep,successes,trials,rate,ci_half":
        raise ValueError("unrecognized results header")
    table = ResultsTable(name=rows[0].split(",")[0] if rows else "empty")
    for row in rows:
        name, condition, sweep, succ, trials, _, _ = row.split(",")
        table.name = name
        table.add(condition, sweep, int(succ), int(trials))
    return table


def write_episodes(path, rows: list[tuple[int, int, EpisodeResult]]) -> Path:
    """Per-episode log: (task id, expert distance, result) triples."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["task,distance,success,steps,collisions"]
    for task_id, distance, r in rows:
        lines.append(f"{task_id},{distance},{int(r.success)},{r.steps},{r.collisions}")
    out.write_text("\n".join(lines) + "\n")
    return out


# ---------------------------------------------------------------------------
# trend checks (pure functions of table contents; drive --assert-trends)


def check_distance_trend(table: ResultsTable, condition: str, distances) -> tuple[bool, str]:
    """Success must strictly decrease with distance, beyond the summed CIs."""
    msgs = []
    ok = True
    for a, b in zip(distances, distances[1:]):
        ca, cb = table.cell(condition, a), table.cell(condition, b)
        margin = ca.ci_half + cb.ci_half
        passed = ca.rate - cb.rate > margin
        ok &= passed
        msgs.append(
            f"{a}->{b}: {ca.rate:.2%} -> {cb.rate:.2%} (need drop > {margin:.2%}) "
            f"{'ok' if passed else 'FAIL'}"
        )
    return ok, "; ".join(msgs)


def check_demo_trend(table: ResultsTable, condition: str, counts) -> tuple[bool, str]:
    """Success must be non-decreasing with demo count, within CI slack."""
    msgs = []
    ok = True
    for a, b in zip(counts, counts[1:]):
        ca, cb = table.cell(condition, a), table.cell(condition, b)
        slack = ca.ci_half + cb.ci_half
        passed = cb.rate >= ca.rate - slack
        ok &= passed
        msgs.append(
            f"{a}->{b}: {ca.rate:.2%} -> {cb.rate:.2%} (allow dip {slack:.2%}) "
            f"{'ok' if passed else 'FAIL'}"
        )
    return ok, "; ".join(msgs)


def check_loss_trend(table: ResultsTable, sweep_value) -> tuple[bool, str]:
    """Cycle-loss features must beat triplet-only beyond the summed CIs."""
    ours = table.cell("cycle", sweep_value)
    trip = table.cell("triplet", sweep_value)
    margin = ours.ci_half + trip.ci_half
    passed = ours.rate - trip.rate > margin
    return passed, (
        f"cycle {ours.rate:.2%} vs triplet {trip.rate:.2%} (need gap > {margin:.2%}) "
        f"{'ok' if passed else 'FAIL'}"
    )


def check_baseline_trend(table: ResultsTable, sweep_value) -> tuple[bool, str]:
    """Ours within 10 points of same-perspective UPN and at least 20 points
    above the perspective-shifted UPN."""
    ours = table.cell("ours", sweep_value)
    upn = table.cell("upn", sweep_value)
    persp = table.cell("upn-persp", sweep_value)
    near = ours.rate >= upn.rate - 0.10
    above = ours.rate - persp.rate >= 0.20
    return near and above, (
        f"ours {ours.rate:.2%} vs upn {upn.rate:.2%} (within 10pt: {'ok' if near else 'FAIL'}); "
        f"vs upn-persp {persp.rate:.2%} (lead >= 20pt: {'ok' if above else 'FAIL'})"
    )
