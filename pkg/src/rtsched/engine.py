"""Seeded slot-by-slot simulation, stability classification and sweeps."""
import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import add_arrivals, advance_buffers, empty_buffers, slot_gain, update_deficits
from .rng import run_streams
from .sched import make_policy
from .traffic import EMPTY, AdmissionScheme, admit_deficit

log = logging.getLogger(__name__)

SLOPE_THRESHOLD = 1e-3
MIN_SAMPLES = 8

CSV_COLUMNS = (
    "scenario", "scheduler", "seed", "p", "delivery_ratio",
    "mean_deficit", "final_total_deficit", "slope", "stable", "T",
)


class AccountingError(AssertionError):
    """Packet conservation or deficit sign violated during a run."""


@dataclass(frozen=True)
class RunConfig:
    graph: object
    traffic: object
    admission: AdmissionScheme
    scheduler: str
    horizon: int
    seed: int = 0
    sample_every: int = 100
    scenario: str = ""

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")
        if len(self.admission.p) != self.graph.num_links:
            raise ValueError(
                f"admission lists {len(self.admission.p)} ratios for {self.graph.num_links} links"
            )
        if self.traffic.num_links != self.graph.num_links:
            raise ValueError("traffic and graph disagree on the number of links")

    def with_p(self, p):
        return replace(self, admission=AdmissionScheme(self.admission.kind, tuple(p)))


@dataclass
class RunMetrics:
    scenario: str
    scheduler: str
    seed: int
    p: tuple
    horizon: int
    delivered: list = field(default_factory=list)
    arrivals: list = field(default_factory=list)
    expired: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    delivery_ratio: list = field(default_factory=list)
    series: list = field(default_factory=list)
    sample_every: int = 1
    mean_deficit: float = 0.0
    final_total_deficit: float = 0.0
    total_gain: float = 0.0
    slope: float = 0.0
    stable: object = None
    error: str = ""
    wall_time: float = field(default=0.0, compare=False)

    def csv_row(self):
        return (
            self.scenario,
            self.scheduler,
            str(self.seed),
            ";".join(_fmt(x) for x in self.p),
            ";".join(_fmt(x) for x in self.delivery_ratio),
            _fmt(self.mean_deficit),
            _fmt(self.final_total_deficit),
            _fmt(self.slope),
            "" if self.stable is None else ("stable" if self.stable else "unstable"),
            str(self.horizon),
        )


def _fmt(x):
    return f"{x:.9g}"


def _effective_sample_every(horizon, sample_every):
    # keep at least MIN_SAMPLES points whenever the horizon allows it
    return max(1, min(sample_every, horizon // MIN_SAMPLES))


def run(config):
    """Simulate ``config.horizon`` slots and return the collected metrics.

    Within a slot: arrivals enter the buffer, deficit admission is drawn, the
    policy decides, gain is recorded, then buffers shift and deficits update.
    Conservation and non-negativity are checked every slot.
    """
    started = time.perf_counter()
    graph = config.graph
    k = graph.num_links
    proc = config.traffic.fresh()
    d_max = max(proc.d_max, 1)
    streams = run_streams(config.seed)
    rs_traffic, rs_adm, rs_pol = streams["traffic"], streams["admission"], streams["policy"]
    policy = make_policy(config.scheduler, graph)
    scheme = config.admission
    every = _effective_sample_every(config.horizon, config.sample_every)

    buffer = empty_buffers(k, d_max)
    w = [0.0] * k
    arrived = [0] * k
    delivered = [0] * k
    expired = [0] * k
    series = []
    deficit_sum = 0.0
    gain_sum = 0.0
    adjacent = graph.adjacent

    batch = proc.step(rs_traffic)
    last = config.horizon - 1
    for t in range(config.horizon):
        totals = batch.totals(k)
        buffer = add_arrivals(buffer, batch)
        for l in range(k):
            arrived[l] += totals[l]
        admitted = admit_deficit(totals, scheme, rs_adm)

        total_w = sum(w)
        deficit_sum += total_w
        if t % every == 0:
            series.append(total_w)

        dec = policy.decide(buffer, w, rs_pol)
        links = list(dec)
        for i in range(len(links)):
            for j in range(i + 1, len(links)):
                if adjacent(links[i], links[j]):
                    raise AccountingError(f"slot {t}: infeasible schedule {sorted(links)}")
        gain_sum += slot_gain(w, dec)
        for l in dec:
            delivered[l] += 1

        # arrivals for t+1 join after the shift; the last slot has none
        buffer, gone = advance_buffers(buffer, dec, EMPTY)
        w = update_deficits(w, admitted, dec)
        for l in range(k):
            expired[l] += gone[l]
            if arrived[l] != delivered[l] + expired[l] + sum(buffer[l]):
                raise AccountingError(f"slot {t}: packet conservation broken on link {l}")
            if w[l] < 0.0:
                raise AccountingError(f"slot {t}: negative deficit on link {l}")
        if t < last:
            batch = proc.step(rs_traffic)

    residual = [sum(row) for row in buffer]
    ratio = [d / a if a else math.nan for d, a in zip(delivered, arrived)]
    m = RunMetrics(
        scenario=config.scenario,
        scheduler=config.scheduler,
        seed=config.seed,
        p=tuple(scheme.p),
        horizon=config.horizon,
        delivered=delivered,
        arrivals=arrived,
        expired=expired,
        residual=residual,
        delivery_ratio=ratio,
        series=series,
        sample_every=every,
        mean_deficit=deficit_sum / (config.horizon * k),
        final_total_deficit=sum(w),
        total_gain=gain_sum,
    )
    if len(series) >= MIN_SAMPLES:
        m.stable, m.slope = classify_stability(series, config.horizon, max(proc.a_max, 1), every, details=True)
    m.wall_time = time.perf_counter() - started
    return m


def _lsq_slope(ts, ys):
    t = np.asarray(ts, dtype=float)
    y = np.asarray(ys, dtype=float)
    tc = t - t.mean()
    denom = float((tc * tc).sum())
    return float((tc * (y - y.mean())).sum() / denom) if denom > 0 else 0.0


def classify_stability(series, horizon, a_max=1.0, sample_every=None, details=False):
    """Label a sampled total-deficit trajectory ``stable`` or ``unstable``.

    Unstable means the least-squares slope over the second half exceeds
    ``SLOPE_THRESHOLD`` per slot *and* the last-quarter mean exceeds the
    second-quarter mean by more than ``2 * sqrt(horizon) * a_max``. Returns a
    bool (True = stable), or ``(bool, slope)`` with ``details``.
    """
    n = len(series)
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    dt = sample_every if sample_every is not None else horizon / n
    half = n // 2
    slope = _lsq_slope([i * dt for i in range(half, n)], series[half:])
    q = n // 4
    second = float(np.mean(series[q:2 * q]))
    last = float(np.mean(series[n - q:]))
    margin = 2.0 * math.sqrt(horizon) * a_max
    stable = not (slope > SLOPE_THRESHOLD and last > second + margin)
    return (stable, slope) if details else stable


def _safe_run(config):
    try:
        return run(config)
    except Exception as exc:  # one bad run must not sink the sweep
        log.warning("run failed: %s", exc)
        return RunMetrics(
            scenario=config.scenario, scheduler=config.scheduler, seed=config.seed,
            p=tuple(config.admission.p), horizon=config.horizon, error=f"{type(exc).__name__}: {exc}",
        )


def expand_sweep(base, p_values, seeds, schedulers=None, offsets=None):
    """Configs for the cross product, ordered by (p, scheduler, seed)."""
    if not p_values or not seeds:
        raise ValueError("p_values and seeds must be nonempty")
    schedulers = list(schedulers or [base.scheduler])
    k = base.graph.num_links
    offsets = list(offsets) if offsets is not None else [0.0] * k
    configs = []
    for p in p_values:
        per_link = tuple(p) if isinstance(p, (list, tuple)) else tuple(round(p + o, 12) for o in offsets)
        for name in schedulers:
            for seed in seeds:
                try:
                    adm = AdmissionScheme(base.admission.kind, per_link)
                except ValueError as exc:
                    configs.append(_InvalidConfig(base, name, seed, per_link, str(exc)))
                    continue
                configs.append(replace(base, admission=adm, scheduler=name, seed=int(seed)))
    return configs


@dataclass(frozen=True)
class _InvalidConfig:
    base: RunConfig
    scheduler: str
    seed: int
    p: tuple
    reason: str


def _dispatch(config):
    if isinstance(config, _InvalidConfig):
        return RunMetrics(
            scenario=config.base.scenario, scheduler=config.scheduler, seed=config.seed,
            p=config.p, horizon=config.base.horizon, error=f"ValueError: {config.reason}",
        )
    return _safe_run(config)


def sweep(base, p_values, seeds, schedulers=None, offsets=None, threads=1):
    """Run every (p, scheduler, seed) combination; row order never depends on ``threads``."""
    configs = expand_sweep(base, p_values, seeds, schedulers, offsets)
    if threads > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_dispatch, configs))
    return [_dispatch(c) for c in configs]


def write_csv(rows, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        if not r.error:
            writer.writerow(r.csv_row())


def to_csv(rows):
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


def max_stable_p(base, grid, seeds=(0,), offsets=None):
    """Largest grid value whose runs are stable on every seed.

    Bisection over the sorted grid, which presumes stability is monotone in p.
    Returns ``(p, {p: all_stable})`` with ``p`` None if even the lowest point fails.
    """
    grid = sorted(grid)
    k = base.graph.num_links
    offsets = list(offsets) if offsets is not None else [0.0] * k
    seen = {}

    def ok(i):
        p = grid[i]
        if p not in seen:
            flags = []
            for s in seeds:
                cfg = base.with_p(tuple(round(p + o, 12) for o in offsets))
                m = run(replace(cfg, seed=int(s)))
                flags.append(bool(m.stable))
            seen[p] = all(flags)
        return seen[p]

    lo, hi = -1, len(grid) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid - 1
    return (grid[lo] if lo >= 0 else None), seen
