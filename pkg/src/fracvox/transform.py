"""Block graph transforms (GFT, single-level RA-GFT) and RAHT."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .cloud import Block
from .errors import DomainError
from .superres import pairs_within

GRAPH_RADIUS = math.sqrt(3.0)
THRESHOLD = "threshold"
COMPLETE = "complete"


def edge_weight(dist: np.ndarray) -> np.ndarray:
    return 1.0 / dist


@dataclass(frozen=True, eq=False)
class BlockGraph:
    n: int
    edges: np.ndarray  # (E, 2), i < j
    weights: np.ndarray  # (E,)
    connectivity: str
    _basis: list = field(default_factory=list, repr=False)

    def laplacian(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        i, j = self.edges[:, 0], self.edges[:, 1]
        W[i, j] = self.weights
        W[j, i] = self.weights
        return np.diag(W.sum(axis=1)) - W

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        """``(eigenvalues, U)`` with U's columns in ascending graph frequency."""
        if not self._basis:
            self._basis.append(_eig(self.laplacian()))
        return self._basis[0]


def _eig(L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lam, U = np.linalg.eigh(L)
    n = len(L)
    if n:
        tol = 1e-10 * max(1.0, float(np.abs(U).max()))
        first = np.argmax(np.abs(U) > tol, axis=0)
        signs = np.sign(U[first, np.arange(n)])
        signs[signs == 0] = 1.0
        U = U * signs
    return lam, U


def build_block_graph(coords) -> BlockGraph:
    """Threshold graph (distance <= sqrt(3)) with weights 1/distance.

    A disconnected threshold graph is replaced by the complete graph.
    """
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
    n = len(coords)
    if n == 0:
        raise DomainError("empty block")
    if n > 1 and len(np.unique(coords, axis=0)) != n:
        raise DomainError("duplicate coordinates in block")
    edges = pairs_within(coords, GRAPH_RADIUS)
    kind = THRESHOLD
    if n > 1:
        adj = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp > 1:
            i, j = np.triu_indices(n, k=1)
            edges = np.stack([i, j], axis=1).astype(np.int64)
            kind = COMPLETE
    diff = coords[edges[:, 0]] - coords[edges[:, 1]]
    weights = edge_weight(np.sqrt((diff * diff).sum(axis=1).astype(np.float64)))
    return BlockGraph(n, edges, weights, kind)


@lru_cache(maxsize=256)
def _cached_graph(key: bytes) -> BlockGraph:
    return build_block_graph(np.frombuffer(key, dtype=np.int64).reshape(-1, 3))


def block_graph_for(coords: np.ndarray) -> BlockGraph:
    """Graph of a block, memoized on the block-relative geometry."""
    rel = np.ascontiguousarray(coords - coords.min(axis=0), dtype=np.int64)
    return _cached_graph(rel.tobytes())


def gft_forward(graph: BlockGraph, signal) -> np.ndarray:
    signal = np.asarray(signal, dtype=np.float64)
    if signal.shape[0] != graph.n:
        raise DomainError(f"signal length {signal.shape[0]} != graph size {graph.n}")
    return graph.basis()[1].T @ signal


def gft_inverse(graph: BlockGraph, coeffs) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape[0] != graph.n:
        raise DomainError(f"coefficient length {coeffs.shape[0]} != graph size {graph.n}")
    return graph.basis()[1] @ coeffs


@dataclass
class CoefficientPlan:
    """DC per block (block scan order) plus AC per block (ascending frequency)."""

    dc: np.ndarray
    ac: list[np.ndarray]
    block_order: list[tuple[int, int, int]]

    @property
    def ac_flat(self) -> np.ndarray:
        return np.concatenate(self.ac) if self.ac else np.zeros(0)

    @property
    def ac_lengths(self) -> list[int]:
        return [len(a) for a in self.ac]

    def with_values(self, dc, ac_flat) -> "CoefficientPlan":
        cuts = np.cumsum(self.ac_lengths)[:-1]
        return CoefficientPlan(np.asarray(dc, dtype=np.float64),
                               np.split(np.asarray(ac_flat, dtype=np.float64), cuts), self.block_order)


def ragft1_forward(coords: np.ndarray, values, blocks: list[Block]) -> CoefficientPlan:
    """Per-block GFT; DCs pooled across blocks.

    ``values`` is one channel ``(N,)`` or several ``(N, k)`` sharing geometry.
    """
    values = np.asarray(values, dtype=np.float64)
    dc = np.empty((len(blocks),) + values.shape[1:])
    ac = []
    for b, blk in enumerate(blocks):
        c = gft_forward(block_graph_for(coords[blk.voxel_indices]), values[blk.voxel_indices])
        dc[b] = c[0]
        ac.append(c[1:])
    return CoefficientPlan(dc, ac, [blk.origin for blk in blocks])


def ragft1_inverse(coords: np.ndarray, plan: CoefficientPlan, blocks: list[Block]) -> np.ndarray:
    n = sum(len(b) for b in blocks)
    out = np.empty((n,) + np.shape(plan.dc)[1:])
    for b, blk in enumerate(blocks):
        c = np.concatenate((plan.dc[b:b + 1], plan.ac[b]))
        out[blk.voxel_indices] = gft_inverse(block_graph_for(coords[blk.voxel_indices]), c)
    return out


# --------------------------------------------------------------------------
# RAHT
# --------------------------------------------------------------------------

def morton_code(coords: np.ndarray, bits: int) -> np.ndarray:
    """Interleave coordinate bits, x most significant within each level."""
    coords = np.asarray(coords, dtype=np.int64)
    code = np.zeros(len(coords), dtype=np.int64)
    for b in range(bits):
        for a in range(3):
            code |= ((coords[:, a] >> b) & 1) << (3 * b + 2 - a)
    return code


@dataclass
class _RahtStep:
    order: np.ndarray  # sorts incoming nodes so pair members are adjacent
    first: np.ndarray  # position (in sorted order) of each outgoing node's first child
    paired: np.ndarray  # bool per outgoing node
    wa: np.ndarray  # weights of the even child (paired nodes only)
    wb: np.ndarray


def _raht_plan(coords: np.ndarray, depth: int) -> list[_RahtStep]:
    if depth > 21:
        raise DomainError("RAHT supports depth <= 21")
    pos = np.asarray(coords, dtype=np.int64).copy()
    w = np.ones(len(pos))
    steps = []
    for _level in range(depth):
        for axis in range(3):
            parent = pos.copy()
            parent[:, axis] >>= 1
            key = morton_code(parent, depth)
            order = np.lexsort((pos[:, axis], key))
            sk = key[order]
            starts = np.flatnonzero(np.concatenate(([True], sk[1:] != sk[:-1])))
            sizes = np.diff(np.concatenate((starts, [len(sk)])))
            paired = sizes == 2
            ws = w[order]
            wa = ws[starts[paired]]
            wb = ws[starts[paired] + 1]
            steps.append(_RahtStep(order, starts, paired, wa, wb))
            new_w = ws[starts].copy()
            new_w[paired] = wa + wb
            pos = parent[order][starts]
            w = new_w
    return steps


def _check_range(coords: np.ndarray, depth: int) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
    if len(coords) and (coords.min() < 0 or coords.max() >= (1 << depth)):
        raise DomainError(f"coordinates outside [0, 2^{depth})")
    return coords


def raht_forward(coords, values, depth: int) -> np.ndarray:
    """Region-adaptive Haar transform.

    Merges along x, y, z at each octree level from leaves to root. Output:
    root DC, then high-pass coefficients from the coarsest merge step to the
    finest, each step in Morton order of the merged node.
    """
    coords = _check_range(coords, depth)
    vals = np.asarray(values, dtype=np.float64)
    if len(coords) == 0:
        return vals.copy()
    steps = _raht_plan(coords, depth)
    highs = []
    for st in steps:
        v = vals[st.order]
        a = v[st.first[st.paired]]
        b = v[st.first[st.paired] + 1]
        sa, sb = np.sqrt(st.wa), np.sqrt(st.wb)
        norm = np.sqrt(st.wa + st.wb)
        if v.ndim == 2:
            sa, sb, norm = sa[:, None], sb[:, None], norm[:, None]
        low = (sa * a + sb * b) / norm
        highs.append((sb * a - sa * b) / norm)
        nv = v[st.first].copy()
        nv[st.paired] = low
        vals = nv
    return np.concatenate([vals] + highs[::-1])


def raht_inverse(coords, coeffs, depth: int) -> np.ndarray:
    coords = _check_range(coords, depth)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if len(coords) == 0:
        return coeffs.copy()
    steps = _raht_plan(coords, depth)
    vals = coeffs[:1]
    pos = 1
    for st in reversed(steps):
        k = int(st.paired.sum())
        high = coeffs[pos:pos + k]
        pos += k
        low = vals[st.paired]
        sa, sb = np.sqrt(st.wa), np.sqrt(st.wb)
        norm = np.sqrt(st.wa + st.wb)
        if coeffs.ndim == 2:
            sa, sb, norm = sa[:, None], sb[:, None], norm[:, None]
        n_in = len(st.order)
        v = np.empty((n_in,) + coeffs.shape[1:])
        v[st.first] = vals
        v[st.first[st.paired]] = (sa * low + sb * high) / norm
        v[st.first[st.paired] + 1] = (sb * low - sa * high) / norm
        out = np.empty_like(v)
        out[st.order] = v
        vals = out
    return vals
