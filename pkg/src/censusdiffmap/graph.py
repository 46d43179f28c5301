"""Feature standardization, Euclidean distances and the top-k similarity graph."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .errors import (
    AllColumnsConstant,
    CoincidentRows,
    DroppedColumnsWarning,
    DuplicateAreaId,
    NonFiniteInput,
)

logger = logging.getLogger(__name__)

DEFAULT_K_NEIGHBORS = 10
CLAMP_FACTOR = 1e-6


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FeatureMatrix:
    """Area-by-variable table, raw or column-standardized.

    ``column_means``/``column_stds`` are only populated by :func:`standardize`
    and describe the retained columns. ``warnings`` records dropped columns.
    """

    area_ids: tuple
    values: np.ndarray
    column_names: tuple
    standardized: bool = False
    column_means: np.ndarray | None = None
    column_stds: np.ndarray | None = None
    warnings: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "area_ids", tuple(str(a) for a in self.area_ids))
        object.__setattr__(self, "column_names", tuple(str(c) for c in self.column_names))
        values = _frozen(self.values)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {values.shape}")
        object.__setattr__(self, "values", values)
        if values.shape != (len(self.area_ids), len(self.column_names)):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{len(self.area_ids)} areas x {len(self.column_names)} columns"
            )
        if len(set(self.area_ids)) != len(self.area_ids):
            seen, dup = set(), []
            for a in self.area_ids:
                if a in seen:
                    dup.append(a)
                seen.add(a)
            raise DuplicateAreaId(f"duplicate area ids: {sorted(set(dup))[:10]}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise NonFiniteInput(
                f"non-finite value at area {self.area_ids[bad[0]]!r}, "
                f"column {self.column_names[bad[1]]!r}"
            )
        for name in ("column_means", "column_stds"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _frozen(v))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class SimilarityGraph:
    """Sparse symmetric similarity matrix over ``area_ids`` (no self-loops)."""

    area_ids: tuple
    weights: sp.csr_matrix
    k_neighbors: int = DEFAULT_K_NEIGHBORS
    _degree: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "area_ids", tuple(self.area_ids))
        w = sp.csr_matrix(self.weights, dtype=float)
        w.sum_duplicates()
        w.eliminate_zeros()
        w.sort_indices()
        if w.shape != (len(self.area_ids), len(self.area_ids)):
            raise ValueError("weight matrix shape does not match area_ids")
        w.data.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_degree", np.diff(w.indptr))

    @property
    def n_nodes(self):
        return len(self.area_ids)

    @property
    def degrees(self):
        """Number of incident edges per node."""
        return self._degree

    def edges(self):
        """Yield ``(i, j, weight)`` for each undirected edge with ``i < j``."""
        coo = sp.triu(self.weights, k=1).tocoo()
        for i, j, w in zip(coo.row, coo.col, coo.data):
            yield int(i), int(j), float(w)

    def to_dense(self):
        return self.weights.toarray()


def standardize(raw):
    """Return the z-scored copy of ``raw`` using the population std (ddof=0).

    Constant columns cannot be scaled; they are dropped and reported through
    both a :class:`DroppedColumnsWarning` and ``result.warnings``.
    """
    if raw.standardized:
        raise ValueError("feature matrix is already standardized")
    m = raw.values.shape[0]
    if m < 2:
        raise ValueError(f"need at least 2 areas to standardize, got {m}")
    a = raw.values
    mu = a.mean(axis=0)
    centered = a - mu
    sigma = np.sqrt((centered**2).sum(axis=0) / m)
    # judge constancy on the raw values; the float mean of a constant column can be off by an ulp
    keep = (a.max(axis=0) != a.min(axis=0)) & (sigma > 0)
    dropped = [raw.column_names[j] for j in np.flatnonzero(~keep)]
    if not keep.any():
        raise AllColumnsConstant(f"all {a.shape[1]} columns are constant")
    notes = []
    if dropped:
        msg = f"dropped {len(dropped)} constant column(s): {dropped[:10]}"
        notes.append(msg)
        logger.warning(msg)
        warnings.warn(msg, DroppedColumnsWarning, stacklevel=2)
    b = centered[:, keep] / sigma[keep]
    return FeatureMatrix(
        area_ids=raw.area_ids,
        values=b,
        column_names=[c for c, k in zip(raw.column_names, keep) if k],
        standardized=True,
        column_means=mu[keep],
        column_stds=sigma[keep],
        warnings=tuple(raw.warnings) + tuple(notes),
    )


def pairwise_distances(b, n_jobs=1, block_size=512):
    """Dense M x M Euclidean distance matrix between the rows of ``b``.

    Each entry is computed directly from its row pair, so the result does not
    depend on ``n_jobs`` or ``block_size``.
    """
    if not b.standardized:
        raise ValueError("pairwise_distances expects a standardized FeatureMatrix")
    x = np.ascontiguousarray(b.values)
    m = x.shape[0]
    d = np.empty((m, m))
    starts = list(range(0, m, block_size))

    def fill(s):
        e = min(s + block_size, m)
        d[s:e] = cdist(x[s:e], x, metric="euclidean")

    if n_jobs == 1 or len(starts) == 1:
        for s in starts:
            fill(s)
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(fill, starts))
    # cdist is exact per pair but symmetrize explicitly so D == D.T bitwise
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return d


def _top_k_mask(sim, k):
    """Boolean mask of each row's k largest entries, ties to the smaller column."""
    m = sim.shape[0]
    # stable sort on the negated values keeps equal values in index order
    order = np.argsort(-sim, axis=1, kind="stable")[:, :k]
    mask = np.zeros((m, m), dtype=bool)
    mask[np.arange(m)[:, None], order] = True
    return mask


def build_similarity_graph(distances, k_neighbors=DEFAULT_K_NEIGHBORS, area_ids=None,
                           clamp_coincident=False):
    """Reciprocal-distance similarity graph kept by the union-of-top-k rule.

    An edge (i, j) survives when 1/D_ij is among the ``k_neighbors`` largest
    similarities of node i or of node j, so every node keeps at least
    ``min(k_neighbors, M - 1)`` edges.

    Coincident rows (D_ij == 0, i != j) raise :class:`CoincidentRows` unless
    ``clamp_coincident`` is set, in which case their distance is replaced by
    ``1e-6`` times the smallest positive distance.
    """
    d = np.array(distances, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distances must be square, got shape {d.shape}")
    if k_neighbors < 1:
        raise ValueError(f"k_neighbors must be >= 1, got {k_neighbors}")
    m = d.shape[0]
    if area_ids is None:
        area_ids = [str(i) for i in range(m)]
    area_ids = tuple(area_ids)
    if len(area_ids) != m:
        raise ValueError("area_ids length does not match distance matrix")
    if not np.allclose(d, d.T, rtol=0, atol=1e-12) or np.any(np.diag(d) != 0):
        raise ValueError("distances must be symmetric with a zero diagonal")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValueError("distances must be finite and non-negative")

    off = ~np.eye(m, dtype=bool)
    zero = (d == 0) & off
    if zero.any():
        ii, jj = np.nonzero(np.triu(zero, k=1))
        if not clamp_coincident:
            raise CoincidentRows((area_ids[i], area_ids[j]) for i, j in zip(ii, jj))
        positive = d[d > 0]
        if positive.size == 0:
            raise CoincidentRows((area_ids[i], area_ids[j]) for i, j in zip(ii, jj))
        logger.warning("clamping %d coincident pair(s)", len(ii))
        d[zero] = positive.min() * CLAMP_FACTOR

    sim = np.zeros_like(d)
    np.divide(1.0, d, out=sim, where=off)
    # self-similarity must never win a top-k slot
    np.fill_diagonal(sim, -np.inf)
    k = min(k_neighbors, m - 1)
    mask = _top_k_mask(sim, k) if k > 0 else np.zeros((m, m), dtype=bool)
    mask |= mask.T
    np.fill_diagonal(mask, False)
    c = np.where(mask, sim, 0.0)
    return SimilarityGraph(area_ids=area_ids, weights=sp.csr_matrix(c), k_neighbors=k_neighbors)


def graph_from_features(features, k_neighbors=DEFAULT_K_NEIGHBORS, clamp_coincident=False,
                        n_jobs=1):
    """standardize -> pairwise_distances -> build_similarity_graph."""
    b = features if features.standardized else standardize(features)
    d = pairwise_distances(b, n_jobs=n_jobs)
    return build_similarity_graph(d, k_neighbors, area_ids=b.area_ids,
                                  clamp_coincident=clamp_coincident)
