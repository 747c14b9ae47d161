"""Per-period tracking error samples and two-sample Kolmogorov-Smirnov comparisons."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

METRICS = ("abs", "signed", "rmse")
AXIS_MODES = ("pooled", "per-axis")
DEFAULT_ALPHA = 0.001
REPORT_HEADER = ["scenario_a", "run_a", "scenario_b", "run_b", "n", "m", "d_stat", "p_value",
                 "rejected"]


class TraceError(ValueError):
    """A trace that cannot be cut into the requested periods."""


class MissingDataError(FileNotFoundError):
    pass


@dataclass(frozen=True)
class ErrorSampleSet:
    scenario_id: str
    run_index: int
    x: np.ndarray
    y: np.ndarray
    axis_mode: str = "pooled"
    metric: str = "abs"

    @property
    def samples(self) -> np.ndarray:
        """Pooled mode: X then Y samples. Per-axis mode: use :meth:`axis`."""
        if self.axis_mode == "per-axis":
            raise ValueError("per-axis sample sets have no pooled samples; use .axis('x'|'y')")
        return np.concatenate([self.x, self.y])

    def axis(self, name: str) -> np.ndarray:
        return {"x": self.x, "y": self.y}[name]

    def views(self) -> dict[str, np.ndarray]:
        """Sample lists that get compared: one pooled list, or one per axis."""
        if self.axis_mode == "per-axis":
            return {"x": self.x, "y": self.y}
        return {"pooled": self.samples}


def _window_means(t: np.ndarray, v: np.ndarray, edges: np.ndarray, end: float) -> np.ndarray:
    """Time-weighted means of the sample-and-hold signal ``v`` over each window.

    Row ``i`` holds its value on ``[t[i], t[i+1])``; the last row holds until
    ``end``. Time before the first row is not covered and not counted.
    """
    bounds = np.append(t, end)
    cum = np.concatenate([[0.0], np.cumsum(v * np.diff(bounds))])

    def integral(x):
        x = np.clip(x, bounds[0], end)
        i = np.clip(np.searchsorted(bounds, x, side="right") - 1, 0, len(v) - 1)
        return cum[i] + v[i] * (x - bounds[i])

    lo = np.clip(edges[:-1], bounds[0], end)
    hi = np.clip(edges[1:], bounds[0], end)
    return (integral(hi) - integral(lo)) / (hi - lo)


def period_errors(trace: np.ndarray, period: float, axis_mode: str = "pooled",
                  metric: str = "abs", duration: float | None = None,
                  scenario_id: str = "", run_index: int = 0) -> ErrorSampleSet:
    """Cut a controller trace into periods and average the tracking error in each.

    ``trace`` has the controller.csv column order. ``duration`` defaults to
    the smallest multiple of ``period`` that covers the last row.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if axis_mode not in AXIS_MODES:
        raise ValueError(f"axis_mode must be one of {AXIS_MODES}")
    trace = np.asarray(trace, dtype=float)
    if trace.ndim != 2 or trace.shape[1] < 5 or len(trace) == 0:
        raise TraceError("trace must be a non-empty (rows, 9) array")
    t = trace[:, 0]
    if np.any(np.diff(t) <= 0):
        raise TraceError("trace times must be strictly increasing")
    if duration is None:
        n_win = max(1, math.ceil(t[-1] / period - 1e-9))
        if t[-1] >= n_win * period:
            n_win += 1
    else:
        n_win = round(duration / period)
        if abs(n_win * period - duration) > 1e-9 * max(1.0, duration):
            raise TraceError(f"duration {duration} is not a multiple of period {period}")
    end = n_win * period
    keep = t < end
    trace, t = trace[keep], t[keep]
    if len(t) == 0:
        raise TraceError("no rows inside the analysed span")
    edges = np.arange(n_win + 1) * period
    counts = np.bincount(np.floor(t / period).astype(int).clip(0, n_win - 1), minlength=n_win)
    if np.any(counts == 0):
        raise TraceError(f"period window {int(np.argmin(counts))} has no trace rows")

    out = []
    for ref_col, ball_col in ((1, 3), (2, 4)):
        err = trace[:, ref_col] - trace[:, ball_col]
        if metric == "abs":
            out.append(_window_means(t, np.abs(err), edges, end))
        elif metric == "signed":
            out.append(_window_means(t, err, edges, end))
        else:
            out.append(np.sqrt(_window_means(t, err * err, edges, end)))
    return ErrorSampleSet(scenario_id, run_index, out[0], out[1], axis_mode, metric)


@dataclass(frozen=True)
class KsResult:
    d_stat: float
    p_value: float
    n: int
    m: int
    rejected: bool
    alpha: float = DEFAULT_ALPHA


def _sup_ecdf_gap(a: Sequence[float], b: Sequence[float]) -> tuple[float, int]:
    """Sorted merge over both samples; returns ``(D, D * n * m)``.

    The ECDF gap is only evaluated once every copy of a tied value has been
    consumed from both samples.
    """
    a, b = sorted(a), sorted(b)
    n, m = len(a), len(b)
    i = j = 0
    d, dnum = 0.0, 0
    while i < n or j < m:
        x = a[i] if j >= m or (i < n and a[i] <= b[j]) else b[j]
        while i < n and a[i] == x:
            i += 1
        while j < m and b[j] == x:
            j += 1
        gap = abs(i / n - j / m)
        if gap > d:
            d = gap
        gap_num = abs(i * m - j * n)
        if gap_num > dnum:
            dnum = gap_num
    return d, dnum


def kolmogorov_q(lam: float) -> float:
    """Kolmogorov survival function ``2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2)``."""
    if lam < 0.2:
        return 1.0  # 1 - Q(0.2) < 1e-11, below the series truncation tolerance
    total, k, sign = 0.0, 1, 1.0
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < 1e-12:
            break
        sign = -sign
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def _exact_pvalue(a: Sequence[float], b: Sequence[float], dnum: int) -> float:
    """Permutation p-value ``P(D* >= D)`` over all ``C(n+m, n)`` relabelings.

    Lattice-path count over the pooled order, checking the ECDF gap only at
    the ends of tie groups. Paths that first reach the observed gap are
    counted with all their completions, which avoids ``1 - x`` cancellation.
    """
    n, m = len(a), len(b)
    if dnum == 0:
        return 1.0
    pooled = sorted(itertools.chain(a, b))
    total = n + m
    ways = [1] + [0] * n  # ways[i]: live paths with i labels from ``a`` so far
    hits = 0
    for p in range(1, total + 1):
        for i in range(min(p, n), 0, -1):
            ways[i] += ways[i - 1]
        if p - m - 1 >= 0:
            ways[p - m - 1] = 0  # would need more than m labels from ``b``
        if p == total or pooled[p] != pooled[p - 1]:
            lo = max(0, p - m)
            for i in range(lo, min(p, n) + 1):
                if ways[i] and abs(i * m - (p - i) * n) >= dnum:
                    hits += ways[i] * math.comb(total - p, n - i)
                    ways[i] = 0
    return min(1.0, hits / math.comb(total, n))


def ks_two_sample(a: Sequence[float], b: Sequence[float], alpha: float = DEFAULT_ALPHA,
                  method: str = "asymptotic") -> KsResult:
    """Two-sample KS test.

    ``method="asymptotic"`` uses the Kolmogorov limit distribution with the
    ``sqrt(ne) + 0.12 + 0.11 / sqrt(ne)`` small-sample correction;
    ``method="exact"`` returns the permutation p-value (``n * m <= 10**4``).
    """
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    d, dnum = _sup_ecdf_gap(a, b)
    if method == "asymptotic":
        ne = n * m / (n + m)
        rt = math.sqrt(ne)
        p = kolmogorov_q((rt + 0.12 + 0.11 / rt) * d)
    elif method == "exact":
        if n * m > 10_000:
            raise ValueError("exact p-values are limited to n * m <= 10**4")
        p = _exact_pvalue(a, b, dnum)
    else:
        raise ValueError(f"unknown method {method!r}")
    return KsResult(d, p, n, m, p < alpha, alpha)


@dataclass(frozen=True)
class PairResult:
    scenario_a: str
    run_a: int
    scenario_b: str
    run_b: int
    ks: KsResult

    def row(self) -> list:
        k = self.ks
        return [self.scenario_a, self.run_a, self.scenario_b, self.run_b, k.n, k.m,
                f"{k.d_stat:.9f}", f"{k.p_value:.9g}", int(k.rejected)]


@dataclass(frozen=True)
class MatrixResult:
    pairs: list[PairResult]

    @property
    def rejections(self) -> int:
        return sum(p.ks.rejected for p in self.pairs)

    def __len__(self):
        return len(self.pairs)


def _compare(sa: ErrorSampleSet, sb: ErrorSampleSet, alpha: float, view: str,
             method: str) -> PairResult:
    ks = ks_two_sample(sa.views()[view], sb.views()[view], alpha, method)
    return PairResult(sa.scenario_id, sa.run_index, sb.scenario_id, sb.run_index, ks)


def selfsim_matrix(runs: Sequence[ErrorSampleSet], alpha: float = DEFAULT_ALPHA,
                   view: str = "pooled", method: str = "asymptotic") -> MatrixResult:
    """All ``C(k, 2)`` pairwise tests among one scenario's runs (6 for 4 runs)."""
    if len(runs) < 2:
        raise ValueError("need at least two runs")
    return MatrixResult([_compare(a, b, alpha, view, method)
                         for a, b in itertools.combinations(runs, 2)])


def cross_matrix(runs_a: Sequence[ErrorSampleSet], runs_b: Sequence[ErrorSampleSet],
                 alpha: float = DEFAULT_ALPHA, view: str = "pooled",
                 method: str = "asymptotic") -> MatrixResult:
    """All ``|a| x |b|`` cross-scenario tests (16 for 4 runs each)."""
    if not runs_a or not runs_b:
        raise ValueError("both scenarios need at least one run")
    return MatrixResult([_compare(a, b, alpha, view, method)
                         for a, b in itertools.product(runs_a, runs_b)])


def ecdf_export(samples: Sequence[float]) -> list[tuple[float, float]]:
    """Right-continuous ECDF as ``(value, F(value))`` at each distinct value."""
    xs = np.sort(np.asarray(samples, dtype=float))
    if len(xs) == 0:
        raise ValueError("samples must be non-empty")
    values, counts = np.unique(xs, return_counts=True)
    fracs = np.cumsum(counts) / len(xs)
    fracs[-1] = 1.0
    return list(zip(values.tolist(), fracs.tolist()))


# -- trace directories -------------------------------------------------------

def load_trace(run_dir: str | Path) -> np.ndarray:
    path = Path(run_dir) / "controller.csv"
    if not path.is_file():
        raise MissingDataError(f"missing {path}")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2).reshape(-1, 9)


def run_dirs(scenario_dir: str | Path) -> list[Path]:
    scenario_dir = Path(scenario_dir)
    if not scenario_dir.is_dir():
        raise MissingDataError(f"no scenario directory {scenario_dir}")
    found = []
    for p in scenario_dir.glob("run_*"):
        suffix = p.name[4:]
        if p.is_dir() and suffix.isdigit():
            found.append((int(suffix), p))
    return [p for _, p in sorted(found)]


def load_scenario(scenario_dir: str | Path, axis_mode: str = "pooled", metric: str = "abs",
                  expect_runs: int | None = None):
    """Load every run of a scenario; returns ``(config, [ErrorSampleSet, ...])``."""
    from .config import load as load_config

    dirs = run_dirs(scenario_dir)
    if not dirs:
        raise MissingDataError(f"no run_* directories under {scenario_dir}")
    snap = dirs[0] / "config.snapshot.json"
    if not snap.is_file():
        raise MissingDataError(f"missing {snap}")
    cfg = load_config(snap)
    want = cfg.runs if expect_runs is None else expect_runs
    indices = [int(p.name[4:]) for p in dirs]
    if indices != list(range(want)):
        raise MissingDataError(
            f"{scenario_dir}: expected runs 0..{want - 1}, found {indices}")
    sets = []
    for k, d in enumerate(dirs):
        trace = load_trace(d)
        sets.append(period_errors(trace, cfg.period, axis_mode, metric, cfg.duration,
                                  cfg.scenario_id, k))
    return cfg, sets


def write_report(path: str | Path, result: MatrixResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for pair in result.pairs:
            w.writerow(pair.row())


def read_report(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def format_table(title: str, headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    cols = [list(map(str, c)) for c in zip(headers, *rows)]
    widths = [max(len(v) for v in c) for c in cols]
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"

    def line(vals):
        return "|" + "|".join(f" {str(v):<{w}} " for v, w in zip(vals, widths)) + "|"

    out = [title, sep, line(headers), sep]
    out += [line(r) for r in rows]
    out.append(sep)
    return "\n".join(out)
