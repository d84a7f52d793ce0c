"""Benchmark report: per (dataset, heuristic) statistics, curves and timing.

Tables are tab-separated text. Standard deviations use the sample
estimator (n - 1); a cell with a single result reports 0.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Iterable, Sequence


@dataclass(frozen=True)
class ResultRecord:
    dataset: str
    heuristic: str
    seed: int
    makespan: float
    tardiness: float
    z: float
    curve: tuple[float, ...] = ()
    iteration_times: tuple[float, ...] = ()
    parallelism: int = 1


def record_from(dataset: str, result) -> ResultRecord:
    """Flatten a search result into a report row."""
    return ResultRecord(
        dataset=dataset,
        heuristic=result.heuristic,
        seed=result.seed,
        makespan=result.best_metrics.makespan,
        tardiness=result.best_metrics.total_tardiness,
        z=result.best_z,
        curve=tuple(result.z_curve),
        iteration_times=tuple(result.iteration_times),
        parallelism=result.parallelism,
    )


def sample_std(xs: Sequence[float]) -> float:
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


@dataclass
class CellStats:
    n: int
    ms_mean: float
    ms_std: float
    tt_mean: float
    tt_std: float
    z_mean: float
    z_std: float


@dataclass
class BenchmarkReport:
    datasets: list[str]
    heuristics: list[str]
    cells: dict[tuple[str, str], CellStats]
    curves: dict[tuple[str, str], list[float]]  # mean best Z per generation
    timing: dict[tuple[str, int], float]  # mean seconds per iteration
    records: list[ResultRecord] = field(default_factory=list)

    def _pair_table(self, first: str, second: str, digits: int = 2) -> str:
        head = ["dataset"]
        for h in self.heuristics:
            head += [f"{h} MS", f"{h} TT"]
        lines = ["\t".join(head)]
        for d in self.datasets:
            row = [d]
            for h in self.heuristics:
                c = self.cells.get((d, h))
                if c is None:
                    row += ["", ""]
                else:
                    row += [f"{getattr(c, first):.{digits}f}", f"{getattr(c, second):.{digits}f}"]
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"

    def means_table(self) -> str:
        """Dataset rows, a (MS, TT) column pair of means per heuristic."""
        return self._pair_table("ms_mean", "tt_mean")

    def std_table(self) -> str:
        """Same layout with sample standard deviations."""
        return self._pair_table("ms_std", "tt_std")

    def z_table(self) -> str:
        lines = ["\t".join(["dataset"] + self.heuristics)]
        for d in self.datasets:
            cells = [self.cells.get((d, h)) for h in self.heuristics]
            lines.append("\t".join([d] + ["" if c is None else f"{c.z_mean:.4f}" for c in cells]))
        return "\n".join(lines) + "\n"

    def curves_table(self) -> str:
        lines = ["dataset\theuristic\tgeneration\tmean_best_z"]
        for (d, h), curve in sorted(self.curves.items()):
            lines += [f"{d}\t{h}\t{g}\t{z:.6f}" for g, z in enumerate(curve)]
        return "\n".join(lines) + "\n"

    def timing_table(self) -> str:
        lines = ["heuristic\tparallelism\tseconds_per_iteration"]
        for (h, p), t in sorted(self.timing.items()):
            lines.append(f"{h}\t{p}\t{t:.6f}")
        return "\n".join(lines) + "\n"

    def results_table(self) -> str:
        lines = ["dataset\theuristic\tseed\tparallelism\tmakespan\ttardiness\tz"]
        for r in self.records:
            lines.append(f"{r.dataset}\t{r.heuristic}\t{r.seed}\t{r.parallelism}\t{r.makespan!r}\t{r.tardiness!r}\t{r.z!r}")
        return "\n".join(lines) + "\n"


def _mean_curve(curves: list[tuple[float, ...]]) -> list[float]:
    """Average over runs; shorter runs hold their last value."""
    curves = [c for c in curves if c]
    if not curves:
        return []
    n = max(len(c) for c in curves)
    return [statistics.fmean(c[min(g, len(c) - 1)] for c in curves) for g in range(n)]


def build_report(
    records: Iterable[ResultRecord],
    heuristics: Sequence[str] | None = None,
    min_seeds: int = 1,
) -> BenchmarkReport:
    """Aggregate result rows. Raises ValueError on no rows or on a cell with
    fewer than ``min_seeds`` results."""
    records = list(records)
    if not records:
        raise ValueError("no results to report")
    datasets = list(dict.fromkeys(r.dataset for r in records))
    order = list(heuristics) if heuristics else list(dict.fromkeys(r.heuristic for r in records))
    groups: dict[tuple[str, str], list[ResultRecord]] = {}
    for r in records:
        groups.setdefault((r.dataset, r.heuristic), []).append(r)
    cells, curves = {}, {}
    for key, rs in groups.items():
        if len(rs) < min_seeds:
            raise ValueError(f"cell {key} has {len(rs)} results, needs {min_seeds}")
        ms = [r.makespan for r in rs]
        tt = [r.tardiness for r in rs]
        zs = [r.z for r in rs]
        cells[key] = CellStats(
            len(rs), statistics.fmean(ms), sample_std(ms), statistics.fmean(tt), sample_std(tt), statistics.fmean(zs), sample_std(zs)
        )
        curves[key] = _mean_curve([r.curve for r in rs])
    per_iter: dict[tuple[str, int], list[float]] = {}
    for r in records:
        if r.iteration_times:
            per_iter.setdefault((r.heuristic, r.parallelism), []).extend(r.iteration_times)
    timing = {k: statistics.fmean(v) for k, v in per_iter.items()}
    return BenchmarkReport(datasets, order, cells, curves, timing, records)
