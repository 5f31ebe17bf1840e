"""
Leakage-minimizing transceiver design under subspace constraints.

Precoders are ``V_n = B^t_n V'_n`` and decorrelators ``U_m = U'_m (B^r_m)^H``
where ``B^t_n`` and ``B^r_m`` are orthonormal bases of the planned
subspaces. Only the inner factors ``V'`` and ``U'`` are optimized, so
every iterate stays inside the planned subspaces.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
import numpy as np

from .channels import ChannelRealization
from .errors import InvalidInputError, NumericalError
from .stage1 import StreamAssignment

logger = logging.getLogger(__name__)

RANK_CHECK_TOL = 1e-6

__all__ = [
    "TransceiverDesign",
    "LeakageReport",
    "leakage",
    "update_decorrelators",
    "update_precoders",
    "random_design",
    "stage2_run",
    "write_leakage_trace",
]


@dataclass(frozen=True)
class TransceiverDesign:
    """Precoders ``V[n]`` (Nt x d_n) and decorrelators ``U[m]`` (d_m x Nr)."""

    V: tuple
    U: tuple
    V_inner: tuple = ()
    U_inner: tuple = ()


@dataclass(frozen=True)
class LeakageReport:
    total: float
    per_link: np.ndarray
    iterations: int = 0
    converged: bool = True
    history: tuple = ()
    rank_ok: tuple = ()

    @property
    def direct_links_ok(self) -> bool:
        return all(self.rank_ok)


@dataclass
class _Problem:
    """Channels restricted to the planned subspaces."""

    d: np.ndarray
    Bt: list
    Br: list
    G: dict = field(default_factory=dict)  # (m, n) -> Br_m^H H_mn Bt_n
    weight: np.ndarray = None  # P_n / d_n

    @classmethod
    def build(cls, assignment: StreamAssignment, realization: ChannelRealization):
        K = assignment.K
        d = np.asarray(assignment.d, dtype=np.int64)
        if realization.K != K:
            raise InvalidInputError("assignment and realization disagree on K")
        Bt = [S.basis for S in assignment.s_t]
        Br = [S.basis for S in assignment.s_r]
        for n in range(K):
            if d[n] and (Bt[n].shape[1] < d[n] or Br[n].shape[1] < d[n]):
                raise InvalidInputError(f"pair {n}: subspace smaller than its streams")
        P = realization.power
        weight = np.where(d > 0, P / np.maximum(d, 1), 0.0)
        G = {}
        for m in range(K):
            for n in range(K):
                if d[m] and d[n]:
                    G[m, n] = Br[m].conj().T @ realization.H[m, n] @ Bt[n]
        return cls(d, Bt, Br, G, weight)

    @property
    def K(self) -> int:
        return self.d.size

    def active(self):
        return [k for k in range(self.K) if self.d[k] > 0]


def _smallest_eigvecs(Q: np.ndarray, k: int, where: str) -> tuple:
    try:
        w, E = np.linalg.eigh((Q + Q.conj().T) / 2)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigen-decomposition failed at {where}: {exc}") from None
    return E[:, :k]


def _rx_covariance(prob: _Problem, Vi, m: int) -> np.ndarray:
    r = prob.Br[m].shape[1]
    Q = np.zeros((r, r), dtype=complex)
    for n in prob.active():
        if n != m:
            A = prob.G[m, n] @ Vi[n]
            Q += prob.weight[n] * (A @ A.conj().T)
    return Q


def _tx_covariance(prob: _Problem, Ui, n: int) -> np.ndarray:
    s = prob.Bt[n].shape[1]
    T = np.zeros((s, s), dtype=complex)
    for m in prob.active():
        if m != n:
            A = Ui[m] @ prob.G[m, n]
            T += A.conj().T @ A
    return prob.weight[n] * T


def _total(prob: _Problem, Vi, Ui) -> float:
    """Leakage evaluated from the products themselves, not from eigenvalues,
    so tiny values keep full relative accuracy."""
    total = 0.0
    act = prob.active()
    for m in act:
        for n in act:
            if m != n:
                A = Ui[m] @ prob.G[m, n] @ Vi[n]
                total += prob.weight[n] * float(np.vdot(A, A).real)
    return total


def _rx_step(prob: _Problem, Vi) -> list:
    Ui = [None] * prob.K
    for m in prob.active():
        E = _smallest_eigvecs(_rx_covariance(prob, Vi, m), int(prob.d[m]), f"Rx {m}")
        Ui[m] = E.conj().T
    return Ui


def _tx_step(prob: _Problem, Ui) -> list:
    Vi = [None] * prob.K
    for n in prob.active():
        Vi[n] = _smallest_eigvecs(_tx_covariance(prob, Ui, n), int(prob.d[n]), f"Tx {n}")
    return Vi


def _assemble(prob: _Problem, Vi, Ui, Nt: int, Nr: int) -> TransceiverDesign:
    V, U = [], []
    for k in range(prob.K):
        if prob.d[k]:
            V.append(prob.Bt[k] @ Vi[k])
            U.append(Ui[k] @ prob.Br[k].conj().T)
        else:
            V.append(np.zeros((Nt, 0), dtype=complex))
            U.append(np.zeros((0, Nr), dtype=complex))
    return TransceiverDesign(tuple(V), tuple(U), tuple(Vi), tuple(Ui))


def _inner(design: TransceiverDesign, prob: _Problem):
    """Inner factors of a design, recovered by projecting on the bases."""
    Vi = [prob.Bt[k].conj().T @ design.V[k] if prob.d[k] else None for k in range(prob.K)]
    Ui = [design.U[k] @ prob.Br[k] if prob.d[k] else None for k in range(prob.K)]
    return Vi, Ui


def leakage(design: TransceiverDesign, assignment: StreamAssignment,
            realization: ChannelRealization) -> LeakageReport:
    """Weighted interference power ``(P_n/d_n) ||U_m H_mn V_n||_F^2`` per link."""
    K = assignment.K
    d = np.asarray(assignment.d)
    per = np.zeros((K, K))
    for m in range(K):
        for n in range(K):
            if m != n and d[m] and d[n]:
                A = design.U[m] @ realization.H[m, n] @ design.V[n]
                per[m, n] = realization.power[n] / d[n] * float(np.vdot(A, A).real)
    return LeakageReport(float(per.sum()), per, rank_ok=_rank_flags(design, d, realization))


def _rank_flags(design: TransceiverDesign, d, realization: ChannelRealization) -> tuple:
    flags = []
    for k in range(len(d)):
        if not d[k]:
            flags.append(True)
            continue
        s = np.linalg.svd(design.U[k] @ realization.H[k, k] @ design.V[k], compute_uv=False)
        scale = max(np.linalg.norm(realization.H[k, k], 2), 1e-300)
        flags.append(bool(s.size == d[k] and s[-1] > RANK_CHECK_TOL * scale))
    return tuple(flags)


def update_decorrelators(design: TransceiverDesign, assignment: StreamAssignment,
                         realization: ChannelRealization) -> TransceiverDesign:
    """Best decorrelators for fixed precoders (smallest-eigenvalue rows)."""
    prob = _Problem.build(assignment, realization)
    Vi, _ = _inner(design, prob)
    Ui = _rx_step(prob, Vi)
    return _assemble(prob, Vi, Ui, *_dims(realization))


def update_precoders(design: TransceiverDesign, assignment: StreamAssignment,
                     realization: ChannelRealization) -> TransceiverDesign:
    """Best precoders for fixed decorrelators (smallest-eigenvalue columns)."""
    prob = _Problem.build(assignment, realization)
    _, Ui = _inner(design, prob)
    Vi = _tx_step(prob, Ui)
    return _assemble(prob, Vi, Ui, *_dims(realization))


def _dims(realization: ChannelRealization) -> tuple:
    return realization.topology.Nt, realization.topology.Nr


def _orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    Z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    Q, _ = np.linalg.qr(Z)
    return Q[:, :cols]


def random_design(assignment: StreamAssignment, realization: ChannelRealization,
                  seed=None) -> TransceiverDesign:
    """Seeded random orthonormal precoders and decorrelators in the subspaces."""
    rng = np.random.default_rng(seed)
    prob = _Problem.build(assignment, realization)
    Vi, Ui = [None] * prob.K, [None] * prob.K
    for k in prob.active():
        Vi[k] = _orthonormal(rng, prob.Bt[k].shape[1], int(prob.d[k]))
        Ui[k] = _orthonormal(rng, prob.Br[k].shape[1], int(prob.d[k])).conj().T
    return _assemble(prob, Vi, Ui, *_dims(realization))


def stage2_run(assignment: StreamAssignment, realization: ChannelRealization,
               max_iters: int = 5000, eps: float = 1e-10, seed=None,
               ) -> tuple[TransceiverDesign, LeakageReport]:
    """
    Alternate receive and transmit eigen-updates until the leakage settles.

    Parameters
    ----------
    max_iters : int
        Cap on full (receive + transmit) iterations.
    eps : float
        Stop once ``|L_k - L_{k-1}| <= eps * max(1, L_{k-1})`` between
        consecutive full iterations, ``L_0`` being the leakage after the
        initial receive update.
    seed : int or Generator, optional
        Seeds the random orthonormal initial precoders.

    Returns
    -------
    design, report
        ``report.history`` holds the leakage after every half-step,
        starting after the first receive update.
    """
    if max_iters < 1:
        raise InvalidInputError("max_iters must be at least 1")
    rng = np.random.default_rng(seed)
    prob = _Problem.build(assignment, realization)
    Nt, Nr = _dims(realization)
    Vi = [None] * prob.K
    for n in prob.active():
        Vi[n] = _orthonormal(rng, prob.Bt[n].shape[1], int(prob.d[n]))
    Ui = _rx_step(prob, Vi)
    history = [_total(prob, Vi, Ui)]
    prev = history[0]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        Vi = _tx_step(prob, Ui)
        after_tx = _total(prob, Vi, Ui)
        Ui = _rx_step(prob, Vi)
        after_rx = _total(prob, Vi, Ui)
        history.extend([after_tx, after_rx])
        if abs(after_rx - prev) <= eps * max(1.0, prev):
            converged = True
            break
        prev = after_rx
    design = _assemble(prob, Vi, Ui, Nt, Nr)
    report = leakage(design, assignment, realization)
    if not report.direct_links_ok:
        bad = [k for k, ok in enumerate(report.rank_ok) if not ok]
        logger.warning("direct-link rank condition fails for pairs %s", bad)
    report = LeakageReport(report.total, report.per_link, it, converged,
                           tuple(history), report.rank_ok)
    return design, report


def write_leakage_trace(report: LeakageReport, path) -> None:
    """CSV with columns ``half_step,total``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["half_step", "total"])
        for i, v in enumerate(report.history):
            w.writerow([i, repr(float(v))])
