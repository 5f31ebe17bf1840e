"""
Partially connected channel generators.

All generators return a :class:`Topology` (the per-link null spaces) paired
with a :class:`ChannelRealization` (the antenna-domain matrices ``H[m, n]``
from Tx ``n`` to Rx ``m``). Indices are 0-based throughout.

Spatial correlation uses the virtual angular representation
``H = A_R @ H_ang @ A_T^H`` with critically spaced uniform linear arrays;
local scattering zeroes whole angular columns of ``H_ang``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .subspace import (Subspace, complement, left_null_space, null_space, span)

logger = logging.getLogger(__name__)

__all__ = [
    "Topology",
    "ChannelRealization",
    "GeometryScene",
    "steering_vector",
    "angular_basis",
    "angular_to_antenna",
    "angular_support",
    "topology_from_channels",
    "gen_symmetric",
    "gen_random_geometric",
    "gen_unequal",
    "gen_fully_connected",
    "gen_fig3_example",
    "consistency_residual",
    "realization_to_dict",
    "realization_from_dict",
]


@dataclass(frozen=True)
class Topology:
    """Per-link null spaces of a K-pair network.

    ``tx_null[m][n]`` is the right null space of ``H[m, n]`` (ambient Nt);
    ``rx_null[m][n]`` holds the left null space as column vectors
    (ambient Nr).
    """

    K: int
    Nt: int
    Nr: int
    tx_null: tuple
    rx_null: tuple

    def __post_init__(self):
        for m in range(self.K):
            for n in range(self.K):
                t, r = self.tx_null[m][n], self.rx_null[m][n]
                if t.ambient != self.Nt or r.ambient != self.Nr:
                    raise InvalidInputError(f"link ({m}, {n}) has wrong ambient")
                if (t.rank == self.Nt) != (r.rank == self.Nr):
                    raise InvalidInputError(
                        f"link ({m}, {n}) is disconnected on one side only")

    def link_rank(self, m: int, n: int) -> int:
        return self.Nt - self.tx_null[m][n].rank

    def connected(self, m: int, n: int) -> bool:
        return self.tx_null[m][n].rank < self.Nt

    def tx_effective(self, n: int) -> Subspace:
        """Signal space of Tx n seen by its own receiver."""
        return complement(self.tx_null[n][n])

    def rx_effective(self, m: int) -> Subspace:
        return complement(self.rx_null[m][m])


@dataclass(frozen=True)
class ChannelRealization:
    """Channel matrices ``H[m, n]`` of shape (K, K, Nr, Nt) plus powers."""

    H: np.ndarray
    topology: Topology
    power: np.ndarray
    seed: Optional[int] = None
    H_ang: Optional[np.ndarray] = None

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        if not np.all(np.isfinite(H)):
            raise InvalidInputError("channel contains non-finite entries")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "power",
                           np.broadcast_to(np.asarray(self.power, float),
                                           (self.K,)).copy())

    @property
    def K(self) -> int:
        return self.topology.K

    def with_power(self, P) -> "ChannelRealization":
        return ChannelRealization(self.H, self.topology, P, self.seed, self.H_ang)


@dataclass(frozen=True)
class GeometryScene:
    """Node placement of a randomized network (km, 2-D)."""

    tx_pos: np.ndarray
    rx_pos: np.ndarray
    L_km: float
    S_km: float
    area_km: float
    streams_claimed: int = 1

    def distance(self) -> np.ndarray:
        """``D[m, n]``: distance from Tx n to Rx m."""
        diff = self.rx_pos[:, None, :] - self.tx_pos[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def angle(self) -> np.ndarray:
        """``theta[m, n]``: direction of Rx m from Tx n off the array normal.

        Arrays lie along the x-axis, so the normal is +y.
        """
        diff = self.rx_pos[:, None, :] - self.tx_pos[None, :, :]
        return np.arctan2(diff[..., 0], diff[..., 1])

    @property
    def degenerate(self) -> bool:
        """True when no direct link is within the interference radius."""
        return bool(np.all(np.diag(self.distance()) > self.L_km))


def steering_vector(N: int, omega: float) -> np.ndarray:
    """ULA response ``(1/sqrt(N)) exp(-j 2 pi k omega)``, k = 0..N-1, as N x 1."""
    if N < 1:
        raise InvalidInputError("steering vector needs N >= 1")
    k = np.arange(N)
    return (np.exp(-2j * np.pi * k * omega) / np.sqrt(N)).reshape(N, 1)


def angular_basis(N: int) -> np.ndarray:
    """Unitary matrix whose column q is ``steering_vector(N, q / N)``."""
    return np.hstack([steering_vector(N, q / N) for q in range(N)])


def angular_to_antenna(H_ang, Nt: int, Nr: int) -> np.ndarray:
    H_ang = np.asarray(H_ang, dtype=complex)
    if H_ang.shape != (Nr, Nt):
        raise InvalidInputError(
            f"angular matrix has shape {H_ang.shape}, expected {(Nr, Nt)}")
    return angular_basis(Nr) @ H_ang @ angular_basis(Nt).conj().T


def _scatter_halfwidth(d_km: float, S_km: float) -> float:
    if S_km > d_km:
        return math.pi
    return math.asin(S_km / d_km)


def _sin_range(lo: float, hi: float) -> tuple[float, float]:
    """Exact range of sin over [lo, hi]."""
    s_lo, s_hi = math.sin(lo), math.sin(hi)
    top, bottom = max(s_lo, s_hi), min(s_lo, s_hi)
    # any peak/trough of sin inside the interval
    if math.floor((hi - math.pi / 2) / (2 * math.pi)) >= \
            math.ceil((lo - math.pi / 2) / (2 * math.pi)):
        top = 1.0
    if math.floor((hi + math.pi / 2) / (2 * math.pi)) >= \
            math.ceil((lo + math.pi / 2) / (2 * math.pi)):
        bottom = -1.0
    return bottom, top


def _circular_gap(c: float, a: float, b: float) -> float:
    """Distance on the unit circle from point c to the arc [a, b] (b - a <= 1)."""
    best = math.inf
    for k in range(-2, 3):
        x = c + k
        if a <= x <= b:
            return 0.0
        best = min(best, abs(x - a), abs(x - b))
    return best


def angular_support(theta_mn: float, d_mn: float, S_km: float, Nt: int) -> set:
    """
    Angular columns q of a link that survive local scattering.

    Column q is kept when some angle in ``[theta - F, theta + F]`` puts
    ``sin(angle)/2`` within ``1/Nt`` of ``q/Nt`` on the unit circle, with
    ``F = arcsin(S/d)`` for ``S <= d`` and ``pi`` otherwise.
    """
    if Nt < 1:
        raise InvalidInputError("Nt must be positive")
    if d_mn < 0 or S_km < 0:
        raise InvalidInputError("distances must be non-negative")
    half = _scatter_halfwidth(d_mn, S_km) if d_mn > 0 else math.pi
    if half >= math.pi:
        a, b = -0.5, 0.5
    else:
        lo, hi = _sin_range(theta_mn - half, theta_mn + half)
        a, b = lo / 2, hi / 2
    eps = 1e-12
    return {q for q in range(Nt) if _circular_gap(q / Nt, a, b) <= 1.0 / Nt + eps}


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _link_nulls_from_angular(H_ang: np.ndarray, support, A_T, A_R):
    """Null spaces of ``A_R H_ang A_T^H`` read off the angular columns."""
    Nr, Nt = H_ang.shape
    support = sorted(support)
    if not support:
        return Subspace.full(Nt), Subspace.full(Nr)
    zeroed = [q for q in range(Nt) if q not in support]
    block = H_ang[:, support]
    ker = null_space(block)
    tx_basis = np.hstack([A_T[:, zeroed], A_T[:, support] @ ker.basis])
    rx = complement(span(A_R @ block))
    return Subspace(tx_basis), rx


def _build_from_angular(H_ang: np.ndarray, supports, power, seed):
    K, _, Nr, Nt = H_ang.shape
    A_T, A_R = angular_basis(Nt), angular_basis(Nr)
    H = np.einsum("ab,mnbc,dc->mnad", A_R, H_ang, A_T.conj())
    tx = [[None] * K for _ in range(K)]
    rx = [[None] * K for _ in range(K)]
    for m in range(K):
        for n in range(K):
            tx[m][n], rx[m][n] = _link_nulls_from_angular(
                H_ang[m, n], supports[m][n], A_T, A_R)
    topo = Topology(K, Nt, Nr, tuple(map(tuple, tx)), tuple(map(tuple, rx)))
    return topo, ChannelRealization(H, topo, power, seed, H_ang)


def topology_from_channels(H: np.ndarray, tol: float = 1e-9) -> Topology:
    """Numerical null spaces of every link."""
    K, _, Nr, Nt = H.shape
    tx = tuple(tuple(null_space(H[m, n], tol) if np.any(H[m, n]) else
                     Subspace.full(Nt) for n in range(K)) for m in range(K))
    rx = tuple(tuple(left_null_space(H[m, n], tol) if np.any(H[m, n]) else
                     Subspace.full(Nr) for n in range(K)) for m in range(K))
    return Topology(K, Nt, Nr, tx, rx)


def _in_band(m: int, n: int, K: int, L: int) -> bool:
    off = abs(n - m)
    return 0 < off <= L or off >= K - L


def gen_symmetric(K: int, Nt: int, Nr: int, L: int, E1: int, E2: int,
                  seed: Optional[int] = None, power=1.0):
    """
    Symmetric network with banded path loss and angular rank limits.

    Direct links keep the angular columns in one shared set of size `E1`.
    Cross links with cyclic offset ``(n - m) mod K`` inside the band keep
    an `E2`-subset drawn once per offset; links outside the band are zero.
    """
    if not (0 <= E1 <= Nt and 0 <= E2 <= Nt and 0 <= L <= K):
        raise InvalidInputError("require E1, E2 <= Nt and L <= K")
    rng = np.random.default_rng(seed)
    e1 = sorted(rng.choice(Nt, size=E1, replace=False).tolist())
    e2 = {off: sorted(rng.choice(Nt, size=E2, replace=False).tolist())
          for off in range(1, K)}
    G = _cn(rng, (K, K, Nr, Nt))
    supports = [[() for _ in range(K)] for _ in range(K)]
    for m in range(K):
        for n in range(K):
            if m == n:
                supports[m][n] = e1
            elif _in_band(m, n, K, L):
                supports[m][n] = e2[(n - m) % K]
    mask = np.zeros((K, K, 1, Nt))
    for m in range(K):
        for n in range(K):
            mask[m, n, 0, list(supports[m][n])] = 1.0
    return _build_from_angular(G * mask, supports, power, seed)


def _place_receivers(rng, tx_pos, area_km, pair_radius_km):
    K = tx_pos.shape[0]
    if pair_radius_km is None:
        return rng.uniform(0, area_km, size=(K, 2))
    rx = np.empty_like(tx_pos)
    for k in range(K):
        while True:
            r = pair_radius_km * math.sqrt(rng.uniform())
            phi = rng.uniform(0, 2 * math.pi)
            p = tx_pos[k] + r * np.array([math.cos(phi), math.sin(phi)])
            if np.all((p >= 0) & (p <= area_km)):
                rx[k] = p
                break
    return rx


def gen_random_geometric(K: int, Nt: int, Nr: int, area_km: float, L_km: float,
                         S_km: float, streams_claimed: int = 1,
                         seed: Optional[int] = None, power=1.0,
                         pair_radius_km: Optional[float] = None):
    """
    Randomized network: links beyond `L_km` are cut, the rest are limited
    to the angular columns illuminated by a scattering disc of radius
    `S_km` around the receiver.

    Transmitters are uniform in the square. Receivers are uniform too, or,
    when `pair_radius_km` is given, uniform in a disc of that radius around
    their own transmitter (clipped to the square).

    Returns ``(scene, topology, realization)``.
    """
    if K < 1 or Nt < 1 or Nr < 1 or area_km <= 0:
        raise InvalidInputError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    tx_pos = rng.uniform(0, area_km, size=(K, 2))
    rx_pos = _place_receivers(rng, tx_pos, area_km, pair_radius_km)
    scene = GeometryScene(tx_pos, rx_pos, float(L_km), float(S_km),
                          float(area_km), streams_claimed)
    G = _cn(rng, (K, K, Nr, Nt))
    D, theta = scene.distance(), scene.angle()
    supports = [[() for _ in range(K)] for _ in range(K)]
    mask = np.zeros((K, K, 1, Nt))
    for m in range(K):
        for n in range(K):
            if D[m, n] <= L_km:
                sup = sorted(angular_support(theta[m, n], D[m, n], S_km, Nt))
                supports[m][n] = sup
                mask[m, n, 0, sup] = 1.0
    if scene.degenerate:
        logger.warning("degenerate scene: every direct link is beyond L_km=%g", L_km)
    topo, real = _build_from_angular(G * mask, supports, power, seed)
    return scene, topo, real


def gen_unequal(K: int, Nt: int, Nr: int, seed: Optional[int] = None, power=1.0):
    """I.i.d. Rayleigh links; null spaces come only from ``Nt != Nr``."""
    rng = np.random.default_rng(seed)
    H = _cn(rng, (K, K, Nr, Nt))
    topo = topology_from_channels(H)
    return topo, ChannelRealization(H, topo, power, seed)


gen_fully_connected = gen_unequal


# Tx-side null directions shared by two cross links each (1-based pairs:
# Tx1 -> Rx4,5; Tx2 -> Rx1,5; Tx4 -> Rx1,2; Tx5 -> Rx2,4).
_FIG3_SHARED_NULLS = {
    (3, 0): (1, -1), (4, 0): (1, -1),
    (0, 1): (1, 0), (4, 1): (1, 0),
    (0, 3): (1, 1), (1, 3): (1, 1),
    (1, 4): (0, 1), (3, 4): (0, 1),
}


def gen_fig3_example(seed: Optional[int] = 0, power=1.0):
    """
    The 5-pair 2x2 network with rank-1 cross links.

    Tx 0 nulls Rx 3,4 along (1,-1); Tx 1 nulls Rx 0,4 along (1,0);
    Tx 3 nulls Rx 0,1 along (1,1); Tx 4 nulls Rx 1,3 along (0,1). All other
    cross links have generic rank-1 null spaces; direct links are full rank.
    """
    rng = np.random.default_rng(seed)
    K, N = 5, 2
    H = np.zeros((K, K, N, N), dtype=complex)
    for m in range(K):
        for n in range(K):
            if m == n:
                H[m, n] = _cn(rng, (N, N))
                continue
            a = _cn(rng, (N, 1))
            if (m, n) in _FIG3_SHARED_NULLS:
                z0, z1 = _FIG3_SHARED_NULLS[(m, n)]
                b = np.array([[z1, -z0]], dtype=complex)  # b @ z = 0
            else:
                b = _cn(rng, (1, N))
            H[m, n] = a @ b
    topo = topology_from_channels(H)
    return topo, ChannelRealization(H, topo, power, seed)


def consistency_residual(real: ChannelRealization) -> float:
    """Largest ``||H v|| / ||H||`` (or ``||u H|| / ||H||``) over null bases."""
    worst = 0.0
    topo = real.topology
    for m in range(real.K):
        for n in range(real.K):
            Hmn = real.H[m, n]
            scale = np.linalg.norm(Hmn)
            if scale == 0:
                continue
            t, r = topo.tx_null[m][n].basis, topo.rx_null[m][n].basis
            worst = max(worst, np.linalg.norm(Hmn @ t) / scale if t.size else 0.0,
                        np.linalg.norm(r.conj().T @ Hmn) / scale if r.size else 0.0)
    return worst


# --- JSON ------------------------------------------------------------------

def _mat_to_json(M: np.ndarray) -> list:
    M = np.asarray(M)
    if M.ndim == 0:
        return [float(M.real), float(M.imag)]
    return [_mat_to_json(x) for x in M]


def _mat_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def subspace_from_json(obj, ambient: int) -> Subspace:
    """Basis stored column by column; an empty list is the zero space."""
    if not obj:
        return Subspace.zero(ambient)
    return Subspace(_mat_from_json(obj).T.reshape(ambient, -1))


def subspace_to_json(S: Subspace) -> list:
    return _mat_to_json(S.basis.T)


def realization_to_dict(real: ChannelRealization,
                        scene: Optional[GeometryScene] = None) -> dict:
    topo = real.topology
    doc = {
        "K": topo.K, "Nt": topo.Nt, "Nr": topo.Nr,
        "seed": real.seed,
        "power": [float(p) for p in real.power],
        "H": _mat_to_json(real.H),
        "tx_null": [[subspace_to_json(topo.tx_null[m][n]) for n in range(topo.K)]
                    for m in range(topo.K)],
        "rx_null": [[subspace_to_json(topo.rx_null[m][n]) for n in range(topo.K)]
                    for m in range(topo.K)],
    }
    if scene is not None:
        doc["scene"] = {
            "tx_pos": scene.tx_pos.tolist(), "rx_pos": scene.rx_pos.tolist(),
            "L_km": scene.L_km, "S_km": scene.S_km, "area_km": scene.area_km,
            "streams_claimed": scene.streams_claimed,
        }
    return doc


def realization_from_dict(doc: dict):
    """Inverse of :func:`realization_to_dict`; returns ``(scene, realization)``."""
    K, Nt, Nr = doc["K"], doc["Nt"], doc["Nr"]
    tx = tuple(tuple(subspace_from_json(doc["tx_null"][m][n], Nt) for n in range(K))
               for m in range(K))
    rx = tuple(tuple(subspace_from_json(doc["rx_null"][m][n], Nr) for n in range(K))
               for m in range(K))
    topo = Topology(K, Nt, Nr, tx, rx)
    H = _mat_from_json(doc["H"]).reshape(K, K, Nr, Nt)
    real = ChannelRealization(H, topo, doc["power"], doc.get("seed"))
    scene = None
    if "scene" in doc:
        s = doc["scene"]
        scene = GeometryScene(np.asarray(s["tx_pos"]), np.asarray(s["rx_pos"]),
                              s["L_km"], s["S_km"], s["area_km"],
                              s.get("streams_claimed", 1))
    return scene, real
