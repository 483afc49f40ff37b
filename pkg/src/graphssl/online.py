"""Streaming quantization with a bounded centroid budget, plus the compact
harmonic solve over centroid multiplicities.

The quantizer is an incremental k-centers scheme: a point within the
current radius of a centroid merges into it, anything else becomes a new
centroid, and when the budget overflows the radius is multiplied by a
factor > 1 and the centroid set is greedily thinned so survivors stay at
least one radius apart.  Any point ever observed is then within
radius * growth / (growth - 1) of its (possibly re-merged) centroid.

A graph whose nodes carry multiplicities v behaves exactly like the graph
where node i is replicated v_i times: edge conductances add, so the full
harmonic solution is recovered from the small system
``(L_uu + gamma_g V_uu) l_u = W_ul l_l`` with W = V W~ V.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import DegenerateGraphError, InputError
from .graph import GraphConfig, SimilarityGraph, connected_components, laplacian
from .harmonic import DEFAULT_TOL, SoftLabels, solve_spd

ABSTAIN = 0


class QuantizerState:
    """Sequential centroid sketch of a stream.

    Exactly one writer: observe() calls are strictly ordered.  After each
    call the centroid count is at most ``capacity``, pairwise centroid
    distances are at least ``radius``, and multiplicities sum to the
    number of points observed.
    """

    def __init__(self, capacity: int, growth: float = 1.5):
        if capacity < 2:
            raise InputError("capacity must be at least 2")
        if not growth > 1:
            raise InputError("growth factor must exceed 1")
        self.capacity = capacity
        self.growth = growth
        self.radius: float | None = None
        self.centroids: list[np.ndarray] = []
        self.multiplicities: list[int] = []
        self.centroid_labels: list[int] = []
        self.label_conflicts = 0
        self.observed = 0
        # old index -> new index mapping of the most recent observe(),
        # None when that call did not repartition
        self.last_repartition: list[int] | None = None

    @property
    def size(self) -> int:
        return len(self.centroids)

    def centroid_matrix(self) -> np.ndarray:
        return np.vstack(self.centroids)

    def max_distortion(self) -> float:
        """Upper bound on any observed point's distance to its centroid:
        the geometric series radius * (1 + 1/m + 1/m^2 + ...)."""
        if self.radius is None:
            return 0.0
        return self.radius * self.growth / (self.growth - 1.0)

    def observe(self, x: np.ndarray, label: int = 0) -> int:
        """Fold one point into the sketch; returns its centroid index
        (valid in post-call indexing)."""
        x = np.asarray(x, dtype=np.float64).ravel()
        if self.centroids and x.shape != self.centroids[0].shape:
            raise InputError("point dimension does not match existing centroids")
        if label not in (-1, 0, 1):
            raise InputError("label must be in {-1, 0, +1}")
        self.last_repartition = None
        self.observed += 1
        idx = self._place(x, label)
        if self.size > self.capacity:
            mapping = self._repartition()
            self.last_repartition = mapping
            idx = mapping[idx]
        return idx

    def _place(self, x: np.ndarray, label: int) -> int:
        if not self.centroids:
            return self._append(x, label)
        d2 = _kernels.cross_sq_dists(self.centroid_matrix(), x[None, :],
                                     np.ones(x.size)).ravel()
        nearest = int(np.argmin(d2))
        if self.radius is None:
            if d2[nearest] == 0.0:
                return self._absorb(nearest, label)
            # first two distinct points set the initial radius
            self.radius = float(np.sqrt(d2[nearest]))
            return self._append(x, label)
        if d2[nearest] < self.radius * self.radius:
            return self._absorb(nearest, label)
        return self._append(x, label)

    def _append(self, x: np.ndarray, label: int) -> int:
        self.centroids.append(x.copy())
        self.multiplicities.append(1)
        self.centroid_labels.append(label)
        return self.size - 1

    def _absorb(self, idx: int, label: int) -> int:
        self.multiplicities[idx] += 1
        if label != 0:
            if self.centroid_labels[idx] == 0:
                self.centroid_labels[idx] = label
            elif self.centroid_labels[idx] != label:
                self.label_conflicts += 1
        return idx

    def _repartition(self) -> list[int]:
        """Grow the radius until a greedy scan keeps at most ``capacity``
        centroids, then merge each dropped centroid into its nearest
        survivor.  Returns the old->new index mapping."""
        pts = self.centroid_matrix()
        d2 = _kernels.pairwise_sq_dists(pts, np.ones(pts.shape[1]))
        keep: list[int] = []
        while True:
            self.radius *= self.growth
            r2 = self.radius * self.radius
            keep = []
            for i in range(len(self.centroids)):
                if all(d2[i, j] >= r2 for j in keep):
                    keep.append(i)
            if len(keep) <= self.capacity:
                break
        mapping = [-1] * len(self.centroids)
        for new, old in enumerate(keep):
            mapping[old] = new
        mult = [self.multiplicities[i] for i in keep]
        labels = [self.centroid_labels[i] for i in keep]
        for i in range(len(self.centroids)):
            if mapping[i] >= 0:
                continue
            target = int(np.argmin(d2[i, keep]))
            mapping[i] = target
            mult[target] += self.multiplicities[i]
            dropped = self.centroid_labels[i]
            if dropped != 0:
                if labels[target] == 0:
                    labels[target] = dropped
                elif labels[target] != dropped:
                    self.label_conflicts += 1
        self.centroids = [self.centroids[i] for i in keep]
        self.multiplicities = mult
        self.centroid_labels = labels
        return mapping


def observe(state: QuantizerState, x: np.ndarray, label: int = 0) -> tuple[QuantizerState, int]:
    idx = state.observe(x, label)
    return state, idx


def max_distortion(state: QuantizerState) -> float:
    return state.max_distortion()


@dataclass(frozen=True)
class CompactGraph:
    """Centroid similarity W~ plus multiplicities; the working weights are
    W = V W~ V."""

    centroid_weights: np.ndarray
    multiplicities: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.centroid_weights, dtype=np.float64)
        v = np.asarray(self.multiplicities, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InputError("centroid weights must be square")
        if v.shape != (w.shape[0],) or np.any(v < 1):
            raise InputError("multiplicities must be a length-k vector of values >= 1")
        object.__setattr__(self, "centroid_weights", w)
        object.__setattr__(self, "multiplicities", v)

    @property
    def k(self) -> int:
        return self.centroid_weights.shape[0]

    def mass_graph(self) -> SimilarityGraph:
        v = self.multiplicities
        return SimilarityGraph(sp.csr_matrix(v[:, None] * self.centroid_weights * v[None, :]))


def compact_harmonic(cg: CompactGraph, centroid_labels: np.ndarray, gamma_g: float = 0.0,
                     tol: float = DEFAULT_TOL) -> SoftLabels:
    """Harmonic solution over centroids that equals the full solve on the
    graph where centroid i is replicated multiplicities[i] times."""
    labels = np.asarray(centroid_labels, dtype=np.float64)
    if labels.shape != (cg.k,):
        raise InputError("centroid_labels must have one entry per centroid")
    labeled = labels != 0
    if not labeled.any():
        raise InputError("at least one labeled centroid required")
    g = cg.mass_graph()
    values = labels.copy()
    unlabeled = ~labeled
    if not unlabeled.any():
        return SoftLabels(values, "compact_hs")
    if gamma_g == 0.0:
        for comp in connected_components(g):
            if not labeled[comp].any():
                raise DegenerateGraphError(
                    "gamma_g = 0 with a label-free centroid component is singular")
    u_idx = np.flatnonzero(unlabeled)
    l_idx = np.flatnonzero(labeled)
    lap = laplacian(g)
    sink = sp.diags(gamma_g * cg.multiplicities[u_idx])
    a = (lap[np.ix_(u_idx, u_idx)] + sink).tocsr()
    b = np.asarray(g.weights[np.ix_(u_idx, l_idx)] @ labels[l_idx]).ravel()
    values[u_idx] = solve_spd(a, b, tol)
    return SoftLabels(values, "compact_hs")


@dataclass(frozen=True)
class OnlineStep:
    prediction: int
    abstained: bool
    centroid: int


def _centroid_similarity(state: QuantizerState, cfg: GraphConfig, eps_cut: float) -> np.ndarray:
    pts = state.centroid_matrix()
    if cfg.sigma is None:
        raise InputError("online prediction needs an explicit sigma")
    psi = np.ones(pts.shape[1])
    d2 = _kernels.pairwise_sq_dists(pts, psi)
    denom = pts.shape[1] * cfg.sigma ** 2 if cfg.normalize_by_p else cfg.sigma ** 2
    w = np.exp(-d2 / denom)
    np.fill_diagonal(w, 0.0)
    w[w < eps_cut] = 0.0
    return w


def predict_online(state: QuantizerState, x: np.ndarray, label: int, gamma_g: float,
                   graph_cfg: GraphConfig) -> OnlineStep:
    """Fold x into the sketch, then predict its label from the compact
    harmonic solution on the centroid graph.

    Centroid similarities are cut at eps = 0.1 * gamma_g; a point whose
    centroid sits in a component with no labeled centroid is treated as
    an outlier and the step abstains.
    """
    idx = state.observe(x, label)
    labels = np.asarray(state.centroid_labels, dtype=np.float64)
    if not np.any(labels != 0):
        return OnlineStep(ABSTAIN, True, idx)
    w = _centroid_similarity(state, graph_cfg, eps_cut=0.1 * gamma_g)
    g = SimilarityGraph(sp.csr_matrix(w))
    comp = next(c for c in connected_components(g) if idx in c)
    if not np.any(labels[comp] != 0):
        return OnlineStep(ABSTAIN, True, idx)
    cg = CompactGraph(w[np.ix_(comp, comp)], np.asarray(state.multiplicities)[comp])
    sol = compact_harmonic(cg, labels[comp], gamma_g)
    value = sol.values[int(np.flatnonzero(comp == idx)[0])]
    if value == 0.0:
        return OnlineStep(ABSTAIN, True, idx)
    return OnlineStep(int(np.sign(value)), False, idx)
