"""
Stream assignment and subspace-constraint design.

The planner picks how many streams each pair carries and, for every
transmitter and receiver, a subspace that its precoder (or decorrelator)
must live in. Subspaces are grown preferentially along directions that
several cross links cannot see, so that the constraints those links
would impose disappear. Streams are switched off one at a time until the
resulting freedom/constraint count is proper.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .channels import ChannelRealization, Topology, subspace_to_json
from .errors import InfeasibleNodeError, InvalidInputError
from .feasibility import FeasibilityVerdict, FreedomConstraintInstance, tree_check
from .subspace import (Subspace, complement, intersect, numerical_rank,
                       projected_rank, span)

logger = logging.getLogger(__name__)

MAX_SUBSET_CARDINALITY = 20
MODES = ("proposed", "max", "min")

__all__ = [
    "StreamAssignment",
    "WeightedNullSpace",
    "init_streams",
    "common_null_spaces",
    "candidate_directions",
    "candidate_subspace",
    "select_tx_subspace",
    "select_rx_subspace",
    "count_instance",
    "design_subspaces",
    "removal_gains",
    "remove_stream",
    "stage1_run",
]


@dataclass(frozen=True)
class StreamAssignment:
    """Streams per pair with the chosen transmit and receive subspaces.

    ``removed`` lists the pairs whose stream count was decremented, in
    order; ``verdict`` is the feasibility result of the final count.
    """

    d: tuple
    s_t: tuple
    s_r: tuple
    removed: tuple = ()
    verdict: Optional[FeasibilityVerdict] = None

    @property
    def K(self) -> int:
        return len(self.d)

    def to_dict(self) -> dict:
        return {
            "d": [int(x) for x in self.d],
            "s_t": [subspace_to_json(S) for S in self.s_t],
            "s_r": [subspace_to_json(S) for S in self.s_r],
            "removed": [int(x) for x in self.removed],
        }


@dataclass(frozen=True)
class WeightedNullSpace:
    """A direction set that every link into (or out of) ``covered`` cannot see.

    For ``side="tx"``, ``node`` is a transmitter and ``covered`` a set of
    receivers; for ``side="rx"`` the roles swap.
    """

    node: int
    side: str
    covered: frozenset
    space: Subspace
    weight: int

    @property
    def sort_key(self):
        return (-self.weight, -len(self.covered), tuple(sorted(self.covered)))


def _check_side(side: str) -> None:
    if side not in ("tx", "rx"):
        raise InvalidInputError(f"side must be 'tx' or 'rx', got {side!r}")


def _effective(topology: Topology, side: str, node: int) -> Subspace:
    return topology.tx_effective(node) if side == "tx" else topology.rx_effective(node)


def _link_null(topology: Topology, side: str, node: int, other: int) -> Subspace:
    """Null space at `node` of the cross link to/from `other`."""
    if side == "tx":
        return topology.tx_null[other][node]
    return topology.rx_null[node][other]


def _connected(topology: Topology, side: str, node: int, other: int) -> bool:
    return topology.connected(other, node) if side == "tx" else topology.connected(node, other)


def init_streams(topology: Topology, realization: ChannelRealization,
                 d_max: Sequence[int]) -> np.ndarray:
    """``d[n] = min(rank(H_nn), d_max[n])``."""
    K = topology.K
    d_max = np.broadcast_to(np.asarray(d_max, dtype=np.int64), (K,))
    if (d_max < 0).any():
        raise InvalidInputError("d_max must be non-negative")
    ranks = np.array([numerical_rank(realization.H[n, n]) if np.any(realization.H[n, n])
                      else 0 for n in range(K)], dtype=np.int64)
    return np.minimum(ranks, d_max)


@lru_cache(maxsize=4096)
def _null_lattice(topology: Topology, side: str, node: int, prune: bool = True):
    """
    Non-trivial intersections of cross-link null spaces, restricted to the
    node's effective space, for every subset of connected counterparts.

    Subsets grow by one element at a time; with `prune` a subset is only
    evaluated when every one-smaller subset survived. Returns
    ``(entries, visits)`` where entries are ``(subset, space)`` pairs.
    """
    K = topology.K
    eff = _effective(topology, side, node)
    linked = [o for o in range(K) if o != node and _connected(topology, side, node, o)]
    level = {}
    visits = 0
    for o in linked:
        visits += 1
        level[(o,)] = intersect(_link_null(topology, side, node, o), eff)
    entries = [(frozenset(s), S) for s, S in level.items() if S.rank > 0]
    C = 1
    while level and C < len(linked):
        if C >= MAX_SUBSET_CARDINALITY:
            logger.warning("common null space search stopped at cardinality %d "
                           "for %s node %d", C, side, node)
            break
        nxt = {}
        for sub, S in level.items():
            if prune and S.rank == 0:
                continue
            for o in linked:
                if o <= sub[-1]:
                    continue
                cand = sub + (o,)
                if prune and any(level.get(p) is None or level[p].rank == 0
                                 for p in combinations(cand, C)):
                    continue
                visits += 1
                nxt[cand] = intersect(S, _link_null(topology, side, node, o))
        level = nxt
        entries.extend((frozenset(s), S) for s, S in level.items() if S.rank > 0)
        C += 1
    return entries, visits


def common_null_spaces(topology: Topology, side: str, node: int, d: Sequence[int],
                       prune: bool = True, stats: Optional[dict] = None) -> list:
    """
    Weighted common null spaces seen from one node.

    Every non-empty subset of connected counterparts whose null spaces
    share a non-zero direction inside the node's effective space yields
    one entry. Disconnected counterparts are added to every covered set,
    and the weight is the total stream count of the covered counterparts.

    Parameters
    ----------
    stats : dict, optional
        Receives ``visits``, the number of intersections computed.
    """
    _check_side(side)
    if not 0 <= node < topology.K:
        raise InvalidInputError(f"node {node} out of range")
    entries, visits = _null_lattice(topology, side, node, prune)
    if stats is not None:
        stats["visits"] = visits
    d = np.asarray(d, dtype=np.int64)
    silent = frozenset(o for o in range(topology.K)
                       if o != node and not _connected(topology, side, node, o))
    out = []
    for sub, S in entries:
        covered = sub | silent
        out.append(WeightedNullSpace(node, side, covered, S,
                                     int(sum(d[o] for o in covered))))
    return out


def _fresh_part(space: Subspace, collected: Optional[np.ndarray]) -> np.ndarray:
    """Basis vectors of `space` that extend the span of `collected`."""
    if collected is None or collected.shape[1] == 0:
        return space.basis
    overlap = intersect(space, span(collected))
    if overlap.rank == 0:
        return space.basis
    return intersect(space, complement(overlap)).basis


def candidate_directions(topology: Topology, side: str, node: int,
                         weighted: list) -> np.ndarray:
    """
    Ordered directions spanning the node's effective space.

    Entries are taken by weight (descending), then larger covered set,
    then lexicographic covered set. Directions from each entry are kept
    while they raise the rank; the remainder of the effective space pads
    the end. Prefixes of the result give nested candidates.
    """
    eff = _effective(topology, side, node)
    dirs = np.zeros((eff.ambient, 0), dtype=complex)
    for entry in sorted(weighted, key=lambda e: e.sort_key):
        if dirs.shape[1] == eff.rank:
            break
        for v in _fresh_part(entry.space, dirs).T:
            trial = np.hstack([dirs, v[:, None]])
            if numerical_rank(trial) > dirs.shape[1]:
                dirs = trial
    if dirs.shape[1] < eff.rank:
        rest = intersect(eff, complement(span(dirs))) if dirs.shape[1] else eff
        dirs = np.hstack([dirs, rest.basis])
    return dirs[:, :eff.rank]


def candidate_subspace(node: int, side: str, dim: int, weighted: list,
                       topology: Topology, d_node: int = 0) -> Subspace:
    """Span of the first `dim` directions of :func:`candidate_directions`."""
    _check_side(side)
    eff_rank = _effective(topology, side, node).rank
    if not d_node <= dim <= eff_rank:
        raise InvalidInputError(
            f"dim {dim} outside [{d_node}, {eff_rank}] for {side} node {node}")
    if dim == 0:
        return Subspace.zero(_effective(topology, side, node).ambient)
    return span(candidate_directions(topology, side, node, weighted)[:, :dim])


def _argmax_largest(scores: list) -> int:
    """Index of the maximum score; ties go to the later (larger) index."""
    best = max(scores)
    return max(i for i, s in enumerate(scores) if s == best)


def _tx_objective(topology: Topology, n: int, S: Subspace, d) -> int:
    K = topology.K
    dim, dn = S.rank, int(d[n])
    total = dn * (dim - dn)
    for m in range(K):
        if m == n or d[m] == 0 or not topology.connected(m, n):
            continue
        rx_side = min(int(d[m]), topology.link_rank(m, n))
        total -= rx_side * min(projected_rank(S, topology.tx_null[m][n]), dn)
    return total


def _rx_objective(topology: Topology, m: int, S: Subspace, d, s_t) -> int:
    K = topology.K
    dim, dm = S.rank, int(d[m])
    total = dm * (dim - dm)
    for n in range(K):
        if n == m or d[n] == 0 or not topology.connected(m, n):
            continue
        rx_side = min(dm, projected_rank(S, topology.rx_null[m][n]))
        tx_side = min(projected_rank(s_t[n], topology.tx_null[m][n]), int(d[n]))
        total -= rx_side * tx_side
    return total


def _candidates(topology: Topology, side: str, node: int, d) -> list:
    dn = int(d[node])
    eff_rank = _effective(topology, side, node).rank
    if dn < 1 or dn > eff_rank:
        raise InfeasibleNodeError(
            f"{side} node {node}: {dn} streams do not fit an effective space "
            f"of rank {eff_rank}")
    dirs = candidate_directions(topology, side, node,
                                common_null_spaces(topology, side, node, d))
    return [span(dirs[:, :dim]) for dim in range(dn, eff_rank + 1)]


def select_tx_subspace(node: int, d: Sequence[int], topology: Topology,
                       return_scores: bool = False):
    """
    Transmit subspace maximizing freedoms minus the constraints it induces.

    Each candidate dimension ``dim`` scores
    ``d_n (dim - d_n) - sum_m min(d_m, rank H_mn) * min(r_mn(dim), d_n)``
    where ``r_mn`` is the rank of the candidate after projecting out the
    null space of ``H_mn``. Ties favour the larger dimension.
    """
    cands = _candidates(topology, "tx", node, d)
    scores = [_tx_objective(topology, node, S, d) for S in cands]
    best = cands[_argmax_largest(scores)]
    return (best, scores) if return_scores else best


def select_rx_subspace(node: int, d: Sequence[int], topology: Topology,
                       chosen_s_t: Sequence[Subspace], return_scores: bool = False):
    """Receive-side counterpart of :func:`select_tx_subspace`.

    The transmit factor of each cross term uses the already chosen
    transmit subspaces.
    """
    cands = _candidates(topology, "rx", node, d)
    scores = [_rx_objective(topology, node, S, d, chosen_s_t) for S in cands]
    best = cands[_argmax_largest(scores)]
    return (best, scores) if return_scores else best


def count_instance(d: Sequence[int], s_t: Sequence[Subspace], s_r: Sequence[Subspace],
                   topology: Topology) -> FreedomConstraintInstance:
    """Freedoms per node and alignment constraints per cross link."""
    K = topology.K
    d = np.asarray(d, dtype=np.int64)
    v_t = np.array([d[n] * (s_t[n].rank - d[n]) if d[n] else 0 for n in range(K)])
    v_r = np.array([d[m] * (s_r[m].rank - d[m]) if d[m] else 0 for m in range(K)])
    c = np.zeros((K, K), dtype=np.int64)
    for m in range(K):
        for n in range(K):
            if m == n or d[m] == 0 or d[n] == 0 or not topology.connected(m, n):
                continue
            rx_side = min(int(d[m]), projected_rank(s_r[m], topology.rx_null[m][n]))
            tx_side = min(int(d[n]), projected_rank(s_t[n], topology.tx_null[m][n]))
            c[m, n] = rx_side * tx_side
    return FreedomConstraintInstance(v_t, v_r, c)


def _design_tx(topology: Topology, n: int, d, mode: str) -> Subspace:
    if d[n] == 0:
        return Subspace.zero(topology.Nt)
    if mode == "max":
        return topology.tx_effective(n)
    if mode == "min":
        return candidate_subspace(n, "tx", int(d[n]),
                                  common_null_spaces(topology, "tx", n, d), topology)
    return select_tx_subspace(n, d, topology)


def _design_rx(topology: Topology, m: int, d, s_t, mode: str) -> Subspace:
    if d[m] == 0:
        return Subspace.zero(topology.Nr)
    if mode == "max":
        return topology.rx_effective(m)
    if mode == "min":
        return candidate_subspace(m, "rx", int(d[m]),
                                  common_null_spaces(topology, "rx", m, d), topology)
    return select_rx_subspace(m, d, topology, s_t)


def design_subspaces(topology: Topology, d, mode: str = "proposed"):
    """Transmit subspaces for all pairs, then receive subspaces given them."""
    K = topology.K
    s_t = [_design_tx(topology, n, d, mode) for n in range(K)]
    s_r = [_design_rx(topology, m, d, s_t, mode) for m in range(K)]
    return s_t, s_r


def _pair_balance(inst: FreedomConstraintInstance, n: int) -> tuple:
    """(constraints touching pair n, freedoms of pair n)."""
    cons = int(inst.c[:, n].sum() + inst.c[n, :].sum())
    free = int(inst.v_t[n] + inst.v_r[n])
    return cons, free


def removal_gains(d: Sequence[int], s_t: Sequence[Subspace], s_r: Sequence[Subspace],
                  topology: Topology, mode: str = "proposed") -> np.ndarray:
    """
    Constraints saved minus freedoms lost by dropping one stream of each pair.

    Only the affected pair's subspaces are redesigned for the reduced
    count; all other subspaces stay fixed. Pairs without streams get
    ``-inf``.
    """
    K = topology.K
    d = np.asarray(d, dtype=np.int64)
    base = count_instance(d, s_t, s_r, topology)
    gains = np.full(K, -np.inf)
    for n in range(K):
        if d[n] == 0:
            continue
        d2 = d.copy()
        d2[n] -= 1
        st2, sr2 = list(s_t), list(s_r)
        st2[n] = _design_tx(topology, n, d2, mode)
        sr2[n] = _design_rx(topology, n, d2, st2, mode)
        trial = count_instance(d2, st2, sr2, topology)
        c0, f0 = _pair_balance(base, n)
        c1, f1 = _pair_balance(trial, n)
        gains[n] = (c0 - c1) - (f0 - f1)
    return gains


def remove_stream(d: Sequence[int], s_t: Sequence[Subspace], s_r: Sequence[Subspace],
                  topology: Topology, mode: str = "proposed") -> int:
    """Pair with the largest removal gain; ties go to the lowest index."""
    if not np.any(np.asarray(d) > 0):
        raise InvalidInputError("no stream left to remove")
    return int(np.argmax(removal_gains(d, s_t, s_r, topology, mode)))


def stage1_run(topology: Topology, realization: ChannelRealization,
               d_max, mode: str = "proposed") -> StreamAssignment:
    """
    Plan streams and subspace constraints until the count is proper.

    Parameters
    ----------
    d_max : int or sequence of int
        Streams claimed per pair.
    mode : {"proposed", "max", "min"}
        ``"proposed"`` scores every candidate dimension; ``"max"`` always
        takes the whole effective space; ``"min"`` takes the smallest
        candidate of dimension ``d_n``.
    """
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}")
    d = init_streams(topology, realization, d_max)
    removed = []
    while True:
        s_t, s_r = design_subspaces(topology, d, mode)
        inst = count_instance(d, s_t, s_r, topology)
        verdict = tree_check(inst)
        if verdict.proper:
            break
        n = remove_stream(d, s_t, s_r, topology, mode)
        logger.debug("improper with d=%s; dropping a stream of pair %d", d.tolist(), n)
        d[n] -= 1
        removed.append(n)
    return StreamAssignment(tuple(int(x) for x in d), tuple(s_t), tuple(s_r),
                            tuple(removed), verdict)
