"""Conditional anomaly scoring: how unusual is the label given the point.

Three scorers:

* random-walk CAD — per-class kernel mass feeds a class-conditional
  density proxy ``mass / (vol + 2 mass)``; the Bayes posterior of the
  opposite label gets an additive ``lam`` in the denominator that acts as
  an "everything else" class and suppresses isolated/fringe points;
* weighted k-NN — the plain Parzen posterior of the opposite label;
* soft harmonic scoring — propagate all (fully labeled) targets softly
  and score each example by |propagated - actual|, optionally on a
  multiplicity-weighted backbone graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import DegenerateGraphError, InputError
from .graph import (PointSet, SimilarityGraph, gaussian_weights_matrix,
                    laplacian, sigma_from_points)
from .harmonic import DEFAULT_TOL, SoftConfig, soft_harmonic, solve_spd
from .rng import PortableRng

LAMBDA_GRID = tuple(10.0 ** e for e in range(-5, 6))


@dataclass(frozen=True)
class CadModel:
    """Per-class training points with precomputed graph volumes, class
    priors, and the regularizer lam."""

    points_pos: np.ndarray
    points_neg: np.ndarray
    vol_pos: float
    vol_neg: float
    prior_pos: float
    prior_neg: float
    lam: float
    sigma: float
    psi: np.ndarray
    normalize_by_p: bool = True

    def masses(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Kernel mass of each query row against each class."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        kw = dict(sigma=self.sigma, psi=self.psi, normalize_by_p=self.normalize_by_p)
        m_pos = gaussian_weights_matrix(x, self.points_pos, **kw).sum(axis=1)
        m_neg = gaussian_weights_matrix(x, self.points_neg, **kw).sum(axis=1)
        return m_pos, m_neg


def fit_cad_model(train: PointSet, lam: float = 0.0, sigma: float | None = None,
                  normalize_by_p: bool = True, priors: str = "empirical") -> CadModel:
    """Split the training set by class and precompute volumes and priors.

    priors: "empirical" uses training class frequencies; "uniform" weighs
    the classes equally (the stationary-mass density proxy is normalized
    per class, so empirical priors cancel class-size information, which on
    strongly imbalanced data leaves the posterior uninformative).
    """
    if lam < 0:
        raise InputError("lam must be >= 0")
    if priors not in ("empirical", "uniform"):
        raise InputError("priors must be 'empirical' or 'uniform'")
    pos = train.points[train.labels == 1]
    neg = train.points[train.labels == -1]
    if pos.shape[0] == 0 or neg.shape[0] == 0:
        raise DegenerateGraphError("both classes need at least one training point")
    sigma = sigma if sigma is not None else sigma_from_points(train.points)
    psi = train.feature_weights

    def class_vol(pts):
        if pts.shape[0] < 2:
            return 0.0
        d2 = _kernels.pairwise_sq_dists(pts, psi)
        denom = pts.shape[1] * sigma * sigma if normalize_by_p else sigma * sigma
        w = np.exp(-d2 / denom)
        np.fill_diagonal(w, 0.0)
        return float(w.sum())

    n_lab = pos.shape[0] + neg.shape[0]
    prior_pos = pos.shape[0] / n_lab if priors == "empirical" else 0.5
    return CadModel(
        points_pos=pos, points_neg=neg,
        vol_pos=class_vol(pos), vol_neg=class_vol(neg),
        prior_pos=prior_pos, prior_neg=1.0 - prior_pos,
        lam=lam, sigma=sigma, psi=psi, normalize_by_p=normalize_by_p,
    )


def _rwcad_from_masses(model: CadModel, m_pos, m_neg, y) -> np.ndarray:
    like_pos = m_pos / (model.vol_pos + 2.0 * m_pos)
    like_neg = m_neg / (model.vol_neg + 2.0 * m_neg)
    total = like_pos * model.prior_pos + like_neg * model.prior_neg
    opposite = np.where(y == 1, like_neg * model.prior_neg, like_pos * model.prior_pos)
    denom = model.lam + total
    return np.divide(opposite, denom, out=np.zeros_like(opposite), where=denom > 0)


def rwcad_scores(model: CadModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Posterior of the opposite label with the lam-padded denominator,
    one score in [0, 1) per query row."""
    y = np.atleast_1d(np.asarray(y))
    m_pos, m_neg = model.masses(x)
    return _rwcad_from_masses(model, m_pos, m_neg, y)


def rwcad_score(model: CadModel, x_e: np.ndarray, y_e: int) -> float:
    return float(rwcad_scores(model, np.atleast_2d(x_e), np.array([y_e]))[0])


def weighted_knn_scores(model: CadModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """1 - Parzen posterior of the observed label."""
    y = np.atleast_1d(np.asarray(y))
    m_pos, m_neg = model.masses(x)
    total = m_pos + m_neg
    if np.any(total <= 0):
        raise DegenerateGraphError("zero kernel mass at a query point")
    own = np.where(y == 1, m_pos, m_neg)
    return 1.0 - own / total


def weighted_knn_score(train: PointSet, x_e: np.ndarray, y_e: int,
                       sigma: float | None = None, normalize_by_p: bool = True) -> float:
    model = fit_cad_model(train, 0.0, sigma, normalize_by_p)
    return float(weighted_knn_scores(model, np.atleast_2d(x_e), np.array([y_e]))[0])


def _loo_masses(ps: PointSet, sigma: float, normalize_by_p: bool):
    """Per-example own/other-class kernel masses with the example's own
    contribution removed from its class."""
    kw = dict(sigma=sigma, psi=ps.feature_weights, normalize_by_p=normalize_by_p)
    k = gaussian_weights_matrix(ps.points, ps.points, **kw)
    np.fill_diagonal(k, 0.0)
    m_pos = k[:, ps.labels == 1].sum(axis=1)
    m_neg = k[:, ps.labels == -1].sum(axis=1)
    return m_pos, m_neg


def rwcad_scores_loo(ps: PointSet, lam: float, sigma: float | None = None,
                     normalize_by_p: bool = True, priors: str = "empirical") -> np.ndarray:
    """Score every example of a fully labeled set against the rest of the
    set (its own node left out of its class graph)."""
    model = fit_cad_model(ps, lam, sigma, normalize_by_p, priors)
    m_pos, m_neg = _loo_masses(ps, model.sigma, normalize_by_p)
    own_is_pos = ps.labels == 1
    vol_pos = np.where(own_is_pos, model.vol_pos - 2.0 * m_pos, model.vol_pos)
    vol_neg = np.where(own_is_pos, model.vol_neg, model.vol_neg - 2.0 * m_neg)
    like_pos = m_pos / (vol_pos + 2.0 * m_pos)
    like_neg = m_neg / (vol_neg + 2.0 * m_neg)
    total = like_pos * model.prior_pos + like_neg * model.prior_neg
    opposite = np.where(own_is_pos, like_neg * model.prior_neg, like_pos * model.prior_pos)
    denom = lam + total
    return np.divide(opposite, denom, out=np.zeros_like(opposite), where=denom > 0)


def weighted_knn_scores_loo(ps: PointSet, sigma: float | None = None,
                            normalize_by_p: bool = True) -> np.ndarray:
    sigma = sigma if sigma is not None else sigma_from_points(ps.points)
    m_pos, m_neg = _loo_masses(ps, sigma, normalize_by_p)
    total = m_pos + m_neg
    if np.any(total <= 0):
        raise DegenerateGraphError("zero leave-one-out kernel mass")
    own = np.where(ps.labels == 1, m_pos, m_neg)
    return 1.0 - own / total


def softhad_score(g: SimilarityGraph, y: np.ndarray, cfg: SoftConfig,
                  tol: float = DEFAULT_TOL) -> np.ndarray:
    """|soft harmonic solution - actual label| over a fully labeled graph;
    scores live in [0, 2], higher is more anomalous."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (g.n,) or not np.all(np.isin(y, (-1.0, 1.0))):
        raise InputError("softhad needs a fully labeled +-1 vector")
    values = soft_harmonic(g, y, cfg, tol).values
    return np.abs(values - y)


def backbone_cad(centroid_graph: SimilarityGraph, multiplicities: np.ndarray,
                 y: np.ndarray, cfg: SoftConfig, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Soft harmonic scoring on a backbone whose node i stands for
    multiplicities[i] collapsed examples.

    Minimizes (l - y)' c_l V (l - y) + l' (L(VWV) + gamma_g V) l, which
    reproduces the expanded-graph score exactly when the backbone comes
    from collapsing duplicate rows.
    """
    v = np.asarray(multiplicities, dtype=np.float64)
    if v.shape != (centroid_graph.n,) or np.any(v < 1):
        raise InputError("multiplicities must be >= 1, one per centroid")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (centroid_graph.n,) or not np.all(np.isin(y, (-1.0, 1.0))):
        raise InputError("backbone CAD needs a fully labeled +-1 vector")
    mass_w = sp.csr_matrix(v[:, None] * centroid_graph.dense() * v[None, :])
    g_mass = SimilarityGraph(mass_w)
    lap = laplacian(g_mass)
    a = (lap + sp.diags((cfg.gamma_g + cfg.c_l) * v)).tocsr()
    values = solve_spd(a, cfg.c_l * v * y, tol)
    return np.abs(values - y)


def backbone_from_sample(ps: PointSet, k: int, seed: int) -> tuple[PointSet, np.ndarray]:
    """Uniformly sample k training points as backbone nodes; each node's
    multiplicity is the number of training points nearest to it."""
    if k > ps.n:
        raise InputError("cannot sample more centroids than points")
    rng = PortableRng(seed)
    idx = np.sort(rng.choice(ps.n, k))
    centroids = ps.points[idx]
    d2 = _kernels.cross_sq_dists(ps.points, centroids, ps.feature_weights)
    assign = np.argmin(d2, axis=1)
    mult = np.bincount(assign, minlength=k).astype(np.float64)
    mult = np.maximum(mult, 1.0)
    return PointSet(centroids, ps.labels[idx], ps.feature_weights), mult


@dataclass(frozen=True)
class TaskScaling:
    """Per-task linear score normalization fitted on training scores."""

    min_score: float
    max_score: float

    def __post_init__(self):
        if self.min_score > self.max_score:
            raise InputError("min_score must not exceed max_score")

    @classmethod
    def fit(cls, train_scores: np.ndarray) -> "TaskScaling":
        s = np.asarray(train_scores, dtype=np.float64)
        return cls(float(s.min()), float(s.max()))


def scale_scores(scaling: TaskScaling, raw: np.ndarray) -> np.ndarray:
    """(s - min) / (max - min) clamped to [0, 1]; a degenerate fitted
    range maps everything to 0.5."""
    raw = np.asarray(raw, dtype=np.float64)
    span = scaling.max_score - scaling.min_score
    if span == 0:
        return np.full(raw.shape, 0.5)
    return np.clip((raw - scaling.min_score) / span, 0.0, 1.0)
