"""
Monte-Carlo experiments: rates, DoF slopes, baselines and parameter sweeps.

Every drop is generated from a seed derived from ``(config.seed, drop)``,
so drops can run in any order or in parallel and merge deterministically.
Designs are computed once per drop at unit power and reused across the
SNR grid; with equal powers the leakage objective is scale-invariant.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channels import (ChannelRealization, gen_fig3_example, gen_fully_connected,
                       gen_random_geometric, gen_symmetric, gen_unequal)
from .errors import ConfigError, NumericalError
from .stage1 import StreamAssignment, init_streams, stage1_run
from .stage2 import (LeakageReport, TransceiverDesign, leakage, random_design,
                     stage2_run)
from .subspace import Subspace

logger = logging.getLogger(__name__)

MODELS = ("symmetric", "geometric", "unequal", "fully_connected", "fig3")
SCHEMES = ("proposed", "bl1", "bl2", "bl3", "bl4", "bl5")
SWEEP_PARAMS = ("L_km", "S_km", "L", "E1", "E2", "K")
CSV_COLUMNS = ("sweep_value", "drop", "scheme", "snr_db", "sum_rate", "streams",
               "d", "leakage")

__all__ = [
    "ExperimentConfig",
    "ResultRecord",
    "generate_drop",
    "per_pair_rate",
    "tdma_rates",
    "run_baseline",
    "run_scheme",
    "estimate_dof",
    "theorem_bound",
    "theorem_df",
    "verify_theorem",
    "run_experiment",
    "write_csv",
    "summarize",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One experiment: a channel model, the schemes to compare and a grid.

    ``sweep_param``/``sweep_values`` optionally repeat the experiment over
    one model parameter; drops share their seeds across sweep values.
    """

    model: str = "geometric"
    K: int = 8
    Nt: int = 6
    Nr: int = 6
    d_max: int = 2
    # symmetric model
    L: int = 1
    E1: int = 4
    E2: int = 2
    # geometric model
    area_km: float = 10.0
    L_km: float = 5.0
    S_km: float = 3.0
    pair_radius_km: Optional[float] = None
    snr_db: tuple = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0)
    drops: int = 1
    seed: int = 0
    schemes: tuple = ("proposed",)
    stage2_eps: float = 1e-10
    stage2_max_iters: int = 5000
    dof_lo_db: float = 40.0
    dof_hi_db: float = 60.0
    sweep_param: Optional[str] = None
    sweep_values: tuple = ()
    name: str = "experiment"

    def __post_init__(self):
        for key in ("snr_db", "schemes", "sweep_values"):
            val = getattr(self, key)
            if isinstance(val, (str, int, float)):
                val = (val,)
            object.__setattr__(self, key, tuple(val))
        object.__setattr__(self, "snr_db", tuple(float(x) for x in self.snr_db))
        self.validate()

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if not self.snr_db:
            raise ConfigError("snr_db must be a non-empty list")
        if self.drops < 1:
            raise ConfigError("drops must be at least 1")
        if min(self.K, self.Nt, self.Nr) < 1:
            raise ConfigError("K, Nt and Nr must be positive")
        if self.d_max < 0:
            raise ConfigError("d_max must be non-negative")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ConfigError(f"schemes must be a non-empty subset of {SCHEMES}, got {bad}")
        if self.model == "symmetric":
            if not (0 <= self.E1 <= self.Nt and 0 <= self.E2 <= self.Nt):
                raise ConfigError("symmetric model needs 0 <= E1, E2 <= Nt")
            if not 0 <= self.L <= self.K:
                raise ConfigError("symmetric model needs 0 <= L <= K")
        if self.model == "geometric":
            if self.area_km <= 0 or self.L_km < 0 or self.S_km < 0:
                raise ConfigError("geometric model needs area_km > 0, L_km >= 0, S_km >= 0")
            if self.pair_radius_km is not None and self.pair_radius_km <= 0:
                raise ConfigError("pair_radius_km must be positive when given")
        if self.model == "fig3" and (self.K, self.Nt, self.Nr) != (5, 2, 2):
            raise ConfigError("model 'fig3' is the fixed 5-pair 2x2 network (K=5, Nt=Nr=2)")
        if self.stage2_max_iters < 1 or self.stage2_eps <= 0:
            raise ConfigError("stage2_max_iters >= 1 and stage2_eps > 0 required")
        if self.dof_hi_db <= self.dof_lo_db:
            raise ConfigError("dof_hi_db must exceed dof_lo_db")
        if (self.sweep_param is None) != (not self.sweep_values):
            raise ConfigError("sweep_param and sweep_values must be given together")
        if self.sweep_param is not None and self.sweep_param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep_param must be one of {SWEEP_PARAMS}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - names)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key in ("snr_db", "schemes", "sweep_values"):
            out[key] = list(out[key])
        return out

    def points(self) -> list:
        """Configs for every sweep value (or just this one)."""
        if self.sweep_param is None:
            return [(None, self)]
        return [(v, dataclasses.replace(self, **{self.sweep_param: v},
                                        sweep_param=None, sweep_values=()))
                for v in self.sweep_values]


@dataclass(frozen=True)
class ResultRecord:
    drop: int
    scheme: str
    snr_db: float
    sum_rate: float
    rates: tuple
    streams: int
    leakage: float
    sweep_value: Optional[float] = None
    d: tuple = ()
    wall_time: float = field(default=0.0, compare=False)


def drop_seed(seed: int, drop: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(drop,)).generate_state(1)[0])


def generate_drop(config: ExperimentConfig, drop: int):
    """``(scene_or_None, topology, realization)`` for one drop."""
    s = drop_seed(config.seed, drop)
    if config.model == "symmetric":
        topo, real = gen_symmetric(config.K, config.Nt, config.Nr, int(config.L),
                                   int(config.E1), int(config.E2), seed=s)
        return None, topo, real
    if config.model == "geometric":
        return gen_random_geometric(config.K, config.Nt, config.Nr, config.area_km,
                                    config.L_km, config.S_km, config.d_max, seed=s,
                                    pair_radius_km=config.pair_radius_km)
    if config.model == "fig3":
        topo, real = gen_fig3_example(seed=s)
        return None, topo, real
    gen = gen_unequal if config.model == "unequal" else gen_fully_connected
    topo, real = gen(config.K, config.Nt, config.Nr, seed=s)
    return None, topo, real


def _power_vector(P, K: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(P, dtype=float), (K,))


def per_pair_rate(design: TransceiverDesign, assignment: StreamAssignment,
                  realization: ChannelRealization, P) -> np.ndarray:
    """
    Rates with residual interference treated as Gaussian noise.

    ``R_m = log2 det(I + (P_m/d_m) G G^H Q^{-1})`` with ``G = U_m H_mm V_m``
    and ``Q = U_m (I + sum_n (P_n/d_n) H_mn V_n V_n^H H_mn^H) U_m^H``.
    """
    K = assignment.K
    d = np.asarray(assignment.d)
    P = _power_vector(P, K)
    H = realization.H
    rates = np.zeros(K)
    for m in range(K):
        if d[m] == 0:
            continue
        Um = design.U[m]
        cov = np.eye(H.shape[2], dtype=complex)
        for n in range(K):
            if n != m and d[n]:
                A = H[m, n] @ design.V[n]
                cov += P[n] / d[n] * (A @ A.conj().T)
        Q = Um @ cov @ Um.conj().T
        G = Um @ H[m, m] @ design.V[m]
        try:
            M = np.eye(d[m]) + P[m] / d[m] * np.linalg.solve(Q, G @ G.conj().T)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"interference covariance at Rx {m} is singular") from exc
        sign, logdet = np.linalg.slogdet(M)
        rates[m] = max(logdet.real / math.log(2), 0.0)
    return rates


def _svd_design(realization: ChannelRealization, d: np.ndarray) -> TransceiverDesign:
    """Top singular vectors of every direct link."""
    Nt, Nr = realization.topology.Nt, realization.topology.Nr
    V, U = [], []
    for k in range(d.size):
        if d[k]:
            Us, _, Vh = np.linalg.svd(realization.H[k, k])
            V.append(Vh[: d[k]].conj().T)
            U.append(Us[:, : d[k]].conj().T)
        else:
            V.append(np.zeros((Nt, 0), dtype=complex))
            U.append(np.zeros((0, Nr), dtype=complex))
    return TransceiverDesign(tuple(V), tuple(U))


def tdma_rates(design: TransceiverDesign, assignment: StreamAssignment,
               realization: ChannelRealization, P) -> np.ndarray:
    """Each active pair transmits alone for a ``1/K_active`` share of time."""
    K = assignment.K
    d = np.asarray(assignment.d)
    active = int(np.count_nonzero(d))
    if active == 0:
        return np.zeros(K)
    P = _power_vector(P, K)
    rates = np.zeros(K)
    for k in range(K):
        if d[k]:
            G = design.U[k] @ realization.H[k, k] @ design.V[k]
            M = np.eye(d[k]) + P[k] / d[k] * (G @ G.conj().T)
            rates[k] = np.linalg.slogdet(M)[1] / math.log(2) / active
    return rates


def _full_assignment(topology, realization, d_max) -> StreamAssignment:
    d = init_streams(topology, realization, d_max)
    K = topology.K
    s_t = tuple(Subspace.full(topology.Nt) if d[n] else Subspace.zero(topology.Nt)
                for n in range(K))
    s_r = tuple(Subspace.full(topology.Nr) if d[n] else Subspace.zero(topology.Nr)
                for n in range(K))
    return StreamAssignment(tuple(int(x) for x in d), s_t, s_r)


_STAGE1_MODE = {"proposed": "proposed", "bl2": "max", "bl3": "min"}


def run_scheme(scheme: str, topology, realization: ChannelRealization, d_max,
               seed=None, eps: float = 1e-10, max_iters: int = 5000):
    """
    Design one scheme on one drop.

    Returns ``(design, assignment, report)``; ``report`` is the leakage at
    the realization's own powers.
    """
    if scheme in _STAGE1_MODE:
        assignment = stage1_run(topology, realization, d_max, mode=_STAGE1_MODE[scheme])
        design, report = stage2_run(assignment, realization, max_iters, eps, seed)
    elif scheme == "bl1":
        assignment = _full_assignment(topology, realization, d_max)
        design, report = stage2_run(assignment, realization, max_iters, eps, seed)
    elif scheme == "bl4":
        assignment = _full_assignment(topology, realization, d_max)
        design = _svd_design(realization, np.asarray(assignment.d))
        report = LeakageReport(0.0, np.zeros((topology.K, topology.K)))
    elif scheme == "bl5":
        assignment = _full_assignment(topology, realization, d_max)
        design = random_design(assignment, realization, seed)
        report = leakage(design, assignment, realization)
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    return design, assignment, report


def run_baseline(which: int, topology, realization, d_max, seed=None, **kw):
    """``(design, assignment)`` of baseline 1..5."""
    if which not in (1, 2, 3, 4, 5):
        raise ConfigError("baseline index must be 1..5")
    design, assignment, _ = run_scheme(f"bl{which}", topology, realization, d_max,
                                       seed, **kw)
    return design, assignment


def scheme_rates(scheme: str, design, assignment, realization, P) -> np.ndarray:
    if scheme == "bl4":
        return tdma_rates(design, assignment, realization, P)
    return per_pair_rate(design, assignment, realization, P)


def _run_point(config: ExperimentConfig, drop: int, sweep_value) -> list:
    _, topo, real = generate_drop(config, drop)
    base = drop_seed(config.seed, drop)
    out = []
    for i, scheme in enumerate(config.schemes):
        t0 = time.perf_counter()
        design, assignment, report = run_scheme(
            scheme, topo, real, config.d_max, seed=[base, i],
            eps=config.stage2_eps, max_iters=config.stage2_max_iters)
        for snr in config.snr_db:
            r = scheme_rates(scheme, design, assignment, real, 10.0 ** (snr / 10.0))
            out.append(ResultRecord(drop, scheme, snr, float(r.sum()),
                                    tuple(float(x) for x in r), int(sum(assignment.d)),
                                    float(report.total), sweep_value,
                                    tuple(assignment.d), time.perf_counter() - t0))
    return out


def _run_task(args) -> list:
    config, drop, value = args
    return _run_point(config, drop, value)


def run_experiment(config: ExperimentConfig, jobs: Optional[int] = None) -> list:
    """All records, ordered by (sweep value, drop, scheme, SNR)."""
    tasks = [(cfg, drop, value) for value, cfg in config.points()
             for drop in range(config.drops)]
    jobs = (os.cpu_count() or 1) if jobs is None else max(1, int(jobs))
    if jobs == 1 or len(tasks) == 1:
        chunks = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            chunks = list(pool.map(_run_task, tasks))
    return [rec for chunk in chunks for rec in chunk]


def estimate_dof(records: Sequence[ResultRecord], snr_lo_db: float = 40.0,
                 snr_hi_db: float = 60.0, scheme: Optional[str] = None) -> float:
    """Two-point slope of the mean sum rate against ``log2(SNR)``."""
    sel = [r for r in records if scheme is None or r.scheme == scheme]
    lo = [r.sum_rate for r in sel if r.snr_db == snr_lo_db]
    hi = [r.sum_rate for r in sel if r.snr_db == snr_hi_db]
    if not lo or not hi:
        raise ConfigError(f"records lack the SNR points {snr_lo_db} and {snr_hi_db} dB")
    if snr_hi_db <= snr_lo_db:
        raise ConfigError("snr_hi_db must exceed snr_lo_db")
    span = (snr_hi_db - snr_lo_db) / 10.0 * math.log2(10.0)
    return (float(np.mean(hi)) - float(np.mean(lo))) / span


def theorem_bound(K: int, Nt: int, Nr: int, L: int, E1: int, E2: int) -> float:
    """Largest per-pair stream count the symmetric-model analysis guarantees."""
    reach = min(K - 1, 2 * L)
    r = min(E1, Nr)
    first = (E1 + r) / (reach + 2)
    second = r / (reach * E2 / Nt + 1)
    return max(first, second)


def theorem_df(K: int, Nt: int, Nr: int, L: int, E1: int, E2: int) -> int:
    return int(math.floor(theorem_bound(K, Nt, Nr, L, E1, E2) + 1e-12))


def verify_theorem(K: int, Nt: int, Nr: int, L: int, E1: int, E2: int, d_f: int,
                   seeds: Sequence[int]) -> float:
    """Fraction of seeds where the planner gives every pair ``d_f`` streams."""
    hits = 0
    for s in seeds:
        topo, real = gen_symmetric(K, Nt, Nr, L, E1, E2, seed=s)
        hits += stage1_run(topo, real, d_f).d == (d_f,) * K
    return hits / len(seeds)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def write_csv(records: Sequence[ResultRecord], path, K: Optional[int] = None) -> None:
    """
    One row per (sweep value, drop, scheme, SNR).

    Columns: ``sweep_value, drop, scheme, snr_db, sum_rate, streams, d,
    leakage, rate_0 .. rate_{K-1}`` where ``d`` lists the per-pair stream
    counts separated by ``;``. Wall times are left out so reruns
    are byte-identical.
    """
    if K is None:
        K = max((len(r.rates) for r in records), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(CSV_COLUMNS) + [f"rate_{k}" for k in range(K)])
        for r in records:
            rates = list(r.rates) + [0.0] * (K - len(r.rates))
            w.writerow([_fmt(r.sweep_value), r.drop, r.scheme, _fmt(r.snr_db),
                        _fmt(r.sum_rate), r.streams, ";".join(map(str, r.d)),
                        _fmt(r.leakage)]
                       + [_fmt(float(x)) for x in rates])


def summarize(records: Sequence[ResultRecord], config: Optional[ExperimentConfig] = None) -> dict:
    """Mean and standard error of the sum rate per (sweep value, scheme, SNR)."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.sweep_value, r.scheme, r.snr_db), []).append(r.sum_rate)
    rows = []
    for (value, scheme, snr), vals in groups.items():
        a = np.asarray(vals)
        se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
        rows.append({"sweep_value": value, "scheme": scheme, "snr_db": snr,
                     "mean_sum_rate": float(a.mean()), "stderr": se, "drops": int(a.size)})
    out = {"rows": rows}
    if config is not None and {config.dof_lo_db, config.dof_hi_db} <= set(config.snr_db):
        dof = {}
        for value, _ in config.points():
            sel = [r for r in records if r.sweep_value == value]
            for scheme in config.schemes:
                key = scheme if value is None else f"{scheme}@{value}"
                dof[key] = estimate_dof(sel, config.dof_lo_db, config.dof_hi_db, scheme)
        out["dof"] = dof
    return out
