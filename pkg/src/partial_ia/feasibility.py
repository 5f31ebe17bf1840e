"""
Properness checks on the freedom/constraint counting instance.

Three independent deciders are provided:

* :func:`brute_force_proper` enumerates transmitter/receiver subsets.
* :func:`tree_check` rebalances a constraint assignment with pressure
  transfer trees, in polynomial time.
* :func:`flow_check` solves the equivalent transportation problem with a
  max-flow routine.

Node labels in traces are ``T<n>`` for transmitters and ``R<m>`` for
receivers, 0-based.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np

from .errors import InvalidInputError, SizeLimitError

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_K = 14


@dataclass(frozen=True)
class FreedomConstraintInstance:
    """Freedoms ``v_t``, ``v_r`` and constraints ``c[m, n]`` (Tx n -> Rx m)."""

    v_t: np.ndarray
    v_r: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        v_t = np.asarray(self.v_t, dtype=np.int64).ravel()
        v_r = np.asarray(self.v_r, dtype=np.int64).ravel()
        c = np.asarray(self.c, dtype=np.int64)
        K = v_t.size
        if v_r.size != K or c.shape != (K, K):
            raise InvalidInputError("v_t, v_r and c disagree on K")
        if (v_t < 0).any() or (v_r < 0).any() or (c < 0).any():
            raise InvalidInputError("freedoms and constraints must be non-negative")
        if np.any(np.diag(c)):
            raise InvalidInputError("direct links carry no constraints (c_mm = 0)")
        for a in (v_t, v_r, c):
            a.setflags(write=False)
        object.__setattr__(self, "v_t", v_t)
        object.__setattr__(self, "v_r", v_r)
        object.__setattr__(self, "c", c)

    @property
    def K(self) -> int:
        return self.v_t.size

    def to_dict(self) -> dict:
        return {"K": self.K, "v_t": self.v_t.tolist(), "v_r": self.v_r.tolist(),
                "c": self.c.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "FreedomConstraintInstance":
        try:
            inst = cls(doc["v_t"], doc["v_r"], doc["c"])
        except KeyError as exc:
            raise InvalidInputError(f"missing field {exc}") from None
        if "K" in doc and doc["K"] != inst.K:
            raise InvalidInputError("declared K does not match the arrays")
        return inst

    @classmethod
    def from_json(cls, text: str) -> "FreedomConstraintInstance":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ConstraintAssignment:
    """Split of every ``c[m, n]`` into ``c_t[n, m] + c_r[m, n]``."""

    c_t: np.ndarray
    c_r: np.ndarray

    def pressures(self, inst: FreedomConstraintInstance):
        """``(P_t, P_r)``: freedoms left at each node after its share."""
        return inst.v_t - self.c_t.sum(axis=1), inst.v_r - self.c_r.sum(axis=1)

    def is_partition_of(self, inst: FreedomConstraintInstance) -> bool:
        return bool(np.array_equal(self.c_t.T + self.c_r, inst.c)
                    and (self.c_t >= 0).all() and (self.c_r >= 0).all())


@dataclass(frozen=True)
class FeasibilityVerdict:
    proper: bool
    assignment: Optional[ConstraintAssignment] = None
    witness: Optional[tuple] = None
    steps: int = 0
    trace: list = field(default_factory=list)


def constraint_surplus(inst: FreedomConstraintInstance, G_T, G_R) -> int:
    """Constraints minus freedoms over the subsets (positive means violated)."""
    G_T, G_R = sorted(G_T), sorted(G_R)
    lhs = sum(int(inst.c[m, n]) for n in G_T for m in G_R if m != n)
    rhs = int(inst.v_t[G_T].sum()) + int(inst.v_r[G_R].sum())
    return lhs - rhs


def brute_force_proper(inst: FreedomConstraintInstance) -> FeasibilityVerdict:
    """
    Check the counting condition on every pair of subsets.

    For each transmitter subset (in increasing bitmask order) the worst
    receiver subset is separable, which lets non-violating transmitter
    subsets be skipped; the first violating receiver subset is then found by
    direct enumeration. The witness is the first violating ``(G_T, G_R)``
    in (transmitter mask, receiver mask) order.
    """
    K = inst.K
    if K > BRUTE_FORCE_MAX_K:
        raise SizeLimitError(f"brute force is limited to K <= {BRUTE_FORCE_MAX_K}")
    c = inst.c
    masks = np.arange(1 << K)
    member = ((masks[:, None] >> np.arange(K)) & 1).astype(np.int64)  # (2^K, K)
    vt_sum = member @ inst.v_t
    # load[T, m] = sum over n in T of c[m, n]; the diagonal is zero
    load = member @ c.T
    excess = load - inst.v_r[None, :]
    worst = np.clip(excess, 0, None).sum(axis=1)
    bad = np.nonzero(worst > vt_sum)[0]
    steps = int(masks.size)
    if bad.size == 0:
        return FeasibilityVerdict(True, steps=steps)
    t = int(bad[0])
    gaps = member @ excess[t]
    r = int(np.nonzero(gaps > vt_sum[t])[0][0])
    G_T = frozenset(i for i in range(K) if t >> i & 1)
    G_R = frozenset(i for i in range(K) if r >> i & 1)
    return FeasibilityVerdict(False, witness=(G_T, G_R), steps=steps)


def flow_check(inst: FreedomConstraintInstance) -> bool:
    """Transportation test: can every constraint be routed to a node with freedoms?"""
    K = inst.K
    total = int(inst.c.sum())
    if total == 0:
        return True
    G = nx.DiGraph()
    for m in range(K):
        for n in range(K):
            if inst.c[m, n] > 0:
                node = ("c", m, n)
                G.add_edge("src", node, capacity=int(inst.c[m, n]))
                G.add_edge(node, ("t", n))  # uncapacitated
                G.add_edge(node, ("r", m))
    for n in range(K):
        G.add_edge(("t", n), "sink", capacity=int(inst.v_t[n]))
    for m in range(K):
        G.add_edge(("r", m), "sink", capacity=int(inst.v_r[m]))
    return nx.maximum_flow_value(G, "src", "sink") == total


class _PressureForest:
    """Mutable state of the pressure transfer procedure.

    Nodes are integers: ``n`` for Tx n, ``K + m`` for Rx m.
    """

    def __init__(self, inst: FreedomConstraintInstance, c_t=None, c_r=None):
        self.K = K = inst.K
        self.inst = inst
        # every constraint starts on the receiver side
        self.c_t = np.zeros((K, K), np.int64) if c_t is None else np.array(c_t, np.int64)
        self.c_r = inst.c.copy() if c_r is None else np.array(c_r, np.int64)
        self.P = np.concatenate([inst.v_t - self.c_t.sum(axis=1),
                                 inst.v_r - self.c_r.sum(axis=1)])
        self.steps = 0  # node attachments plus pressure transfers
        self.scans = 0  # link inspections, for diagnostics
        self.trace: list = []

    def label(self, u: int) -> str:
        return f"T{u}" if u < self.K else f"R{u - self.K}"

    def strength(self, u: int, w: int) -> int:
        K = self.K
        if u < K:
            return int(self.c_t[u, w - K])
        return int(self.c_r[u - K, w])

    def counterparts(self, u: int):
        K = self.K
        return range(K, 2 * K) if u < K else range(K)

    def move(self, u: int, w: int, eps: int) -> None:
        """Shift `eps` constraints of the link between u and w from u to w."""
        K = self.K
        if u < K:
            n, m = u, w - K
            self.c_t[n, m] -= eps
            self.c_r[m, n] += eps
        else:
            m, n = u - K, w
            self.c_r[m, n] -= eps
            self.c_t[n, m] += eps
        self.P[u] += eps
        self.P[w] -= eps

    def first_overloaded(self) -> Optional[int]:
        neg = np.nonzero(self.P < 0)[0]
        return int(neg[0]) if neg.size else None


class _Tree:
    def __init__(self, root: int):
        self.root = root
        self.parent = {root: None}
        self.children = {root: []}

    def __contains__(self, u):
        return u in self.parent

    def add(self, u: int, parent: int) -> None:
        self.parent[u] = parent
        self.children[u] = []
        self.children[parent].append(u)

    def path(self, leaf: int) -> list:
        out = [leaf]
        while self.parent[out[-1]] is not None:
            out.append(self.parent[out[-1]])
        return out[::-1]

    def nodes(self) -> list:
        """Breadth-first order from the root."""
        out, queue = [], deque([self.root])
        while queue:
            u = queue.popleft()
            out.append(u)
            queue.extend(self.children[u])
        return out

    def detach(self, u: int) -> list:
        """Cut the subtree rooted at u; returns its nodes."""
        p = self.parent[u]
        if p is not None:
            self.children[p].remove(u)
        removed, stack = [], [u]
        while stack:
            x = stack.pop()
            removed.append(x)
            stack.extend(self.children.pop(x))
            del self.parent[x]
        return removed


def _grow(forest: _PressureForest, tree: _Tree, sources) -> list:
    """Attach every positive-strength counterpart not yet in the tree."""
    new = []
    for u in sources:
        if u not in tree:
            continue
        for w in forest.counterparts(u):
            forest.scans += 1
            if w not in tree and forest.strength(u, w) > 0:
                tree.add(w, u)
                forest.steps += 1
                new.append(w)
    return new


def _linked_into(forest: _PressureForest, tree: _Tree, cut) -> set:
    """Tree nodes holding a positive-strength link to a node in `cut`."""
    out = set()
    for x in cut:
        for u in forest.counterparts(x):
            forest.scans += 1
            if u in tree and forest.strength(u, x) > 0:
                out.add(u)
    return out


def tree_check(inst: FreedomConstraintInstance, verbose: bool = False) -> FeasibilityVerdict:
    """
    Decide properness by rebalancing a constraint assignment.

    Starting with every constraint charged to its receiver, each overloaded
    node (negative pressure) roots a tree that grows level by level along
    links whose share can still be handed over. Pressure is pushed from the
    root to every positive leaf just added, by the minimum of the root
    deficit, the leaf surplus and the link strengths on the path. Depleted
    links cut their subtree off; a neutralized root dissolves its tree.

    The instance is proper iff no overloaded node remains. If a tree can
    no longer grow, its transmitter and receiver sets form a violating
    subset pair, returned as the witness.

    With ``verbose=True`` one trace line is recorded per transfer.
    """
    forest = _PressureForest(inst)
    K = inst.K
    pending: deque = deque()
    while True:
        root = None
        while pending:
            cand = pending.popleft()
            if forest.P[cand] < 0:
                root = cand
                break
        if root is None:
            root = forest.first_overloaded()
        if root is None:
            break
        tree = _Tree(root)
        frontier = [root]
        reopened: set = set()
        orphans: list = []
        while forest.P[root] < 0:
            # nodes that lost a neighbour to a cut can grow again
            sources = frontier + sorted(reopened.difference(frontier))
            reopened.clear()
            new = _grow(forest, tree, sources)
            if not new:
                members = tree.nodes()
                G_T = frozenset(u for u in members if u < K)
                G_R = frozenset(u - K for u in members if u >= K)
                return FeasibilityVerdict(False, witness=(G_T, G_R),
                                          steps=forest.steps, trace=forest.trace)
            for leaf in new:
                if leaf not in tree or forest.P[leaf] <= 0:
                    continue
                path = tree.path(leaf)
                links = list(zip(path[:-1], path[1:]))
                eps = min([-int(forest.P[root]), int(forest.P[leaf])]
                          + [forest.strength(u, w) for u, w in links])
                if eps <= 0:
                    continue
                for u, w in links:
                    forest.move(u, w, eps)
                forest.steps += 1
                forest.scans += len(links)
                if verbose:
                    line = (f"root={forest.label(root)} leaf={forest.label(leaf)} "
                            f"path={'>'.join(forest.label(x) for x in path)} eps={eps}")
                    forest.trace.append(line)
                    logger.debug(line)
                for u, w in links:
                    if w in tree and forest.strength(u, w) == 0:
                        cut = tree.detach(w)
                        orphans.extend(cut)
                        reopened.update(_linked_into(forest, tree, cut))
                if forest.P[root] >= 0:
                    break
            frontier = [u for u in new if u in tree]
        # overloaded nodes of the dissolved tree and of cut subtrees root new trees
        for u in tree.nodes()[1:] + orphans:
            if forest.P[u] < 0:
                pending.append(u)
    assignment = ConstraintAssignment(forest.c_t.copy(), forest.c_r.copy())
    return FeasibilityVerdict(True, assignment=assignment, steps=forest.steps,
                              trace=forest.trace)
