"""Column-normalized graph Laplacian and its smallest eigenpairs.

L = I - C diag(colsum C)^-1 is not symmetric, but for symmetric C it is
similar to L_sym = I - S^-1/2 C S^-1/2 (S = diag of column sums):

    L = S^1/2 L_sym S^-1/2

so eigenpairs are computed on L_sym and mapped back with v = S^1/2 u.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from .errors import (
    ConvergenceFailure,
    DisconnectedGraphWarning,
    IndexOutOfRange,
    IsolatedNode,
    SpectrumExhausted,
)

logger = logging.getLogger(__name__)

DEFAULT_N_EV = 2
DEFAULT_ZERO_TOLERANCE_REL = 1e-9
DEFAULT_DENSE_CUTOFF = 500
RESIDUAL_TOL = 1e-8
# shift for shift-invert Lanczos; L_sym is PSD so any negative shift is nonsingular
_SHIFT = -1e-3
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class LaplacianMatrix:
    entries: sp.csr_matrix
    degree_vector: np.ndarray
    area_ids: tuple = ()

    @property
    def size(self):
        return self.entries.shape[0]

    def symmetric_form(self):
        """I - S^-1/2 C S^-1/2 as a CSR matrix, exactly symmetric."""
        r = np.sqrt(self.degree_vector)
        sym = sp.diags(1.0 / r) @ self.entries @ sp.diags(r)
        sym = 0.5 * (sym + sym.T)
        return sp.csr_matrix(sym)

    def to_dense(self):
        return self.entries.toarray()


@dataclass(frozen=True)
class SpectralEmbedding:
    """Zero modes followed by the requested nonzero eigenpairs, ascending.

    Column ``j`` of ``eigenvectors`` pairs with ``eigenvalues[j]``; the first
    ``n_components`` columns are the (uninformative) zero modes.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    zero_tolerance: float
    n_components: int
    area_ids: tuple

    @property
    def n_nonzero(self):
        return len(self.eigenvalues) - self.n_components

    @property
    def nonzero_eigenvalues(self):
        return self.eigenvalues[self.n_components:]

    def to_frame(self):
        """Nonzero eigenvectors as a DataFrame with columns ev1, ev2, ..."""
        vecs = self.eigenvectors[:, self.n_components:]
        cols = [f"ev{j + 1}" for j in range(vecs.shape[1])]
        return pd.DataFrame(vecs, index=pd.Index(self.area_ids, name="area_code"), columns=cols)


def build_laplacian(graph):
    """L_ii = 1, L_ij = -C_ij / sum_k C_kj."""
    c = graph.weights
    colsum = np.asarray(c.sum(axis=0)).ravel()
    isolated = np.flatnonzero(colsum <= 0)
    if isolated.size:
        names = [graph.area_ids[i] for i in isolated[:10]]
        raise IsolatedNode(f"{isolated.size} node(s) without edges: {names}")
    m = c.shape[0]
    lap = sp.identity(m, format="csr") - c @ sp.diags(1.0 / colsum)
    lap = sp.csr_matrix(lap)
    lap.sort_indices()
    return LaplacianMatrix(entries=lap, degree_vector=colsum, area_ids=tuple(graph.area_ids))


def count_components(graph):
    """Connected components by graph traversal (independent of the spectrum)."""
    n, _ = connected_components(graph.weights, directed=False)
    return int(n)


def apply_sign_convention(vectors):
    """Flip each column so its largest-magnitude entry is positive.

    Entries within a relative 1e-9 of the maximum magnitude count as tied and
    the smallest index wins, so round-off cannot flip the choice.
    """
    v = np.array(vectors, dtype=float, copy=True)
    squeeze = v.ndim == 1
    if squeeze:
        v = v[:, None]
    mags = np.abs(v)
    peak = mags.max(axis=0)
    for j in range(v.shape[1]):
        if peak[j] == 0:
            continue
        i = int(np.flatnonzero(mags[:, j] >= peak[j] * (1 - _TIE_RTOL))[0])
        if v[i, j] < 0:
            v[:, j] = -v[:, j]
    return v[:, 0] if squeeze else v


def _dense_eigs(sym):
    w, u = scipy.linalg.eigh(sym.toarray())
    return w, u


def _iterative_eigs(sym, k):
    m = sym.shape[0]
    # fixed start vector: ARPACK's default is random
    v0 = np.random.default_rng(0).standard_normal(m)
    try:
        w, u = eigsh(sym, k=k, sigma=_SHIFT, which="LM", v0=v0, tol=0)
    except ArpackNoConvergence as exc:
        raise ConvergenceFailure(f"Lanczos did not converge for k={k}: {exc}") from exc
    except ArpackError as exc:
        raise ConvergenceFailure(f"ARPACK failed for k={k}: {exc}") from exc
    order = np.argsort(w, kind="stable")
    return w[order], u[:, order]


def _tolerance(w, zero_tolerance, zero_tolerance_rel):
    if zero_tolerance is not None:
        return float(zero_tolerance)
    # trace(L_sym) = M so the full spectrum always reaches at least 1
    return zero_tolerance_rel * max(float(np.max(w)), 1.0)


def compute_embedding(lap, n_ev=DEFAULT_N_EV, zero_tolerance=None,
                      zero_tolerance_rel=DEFAULT_ZERO_TOLERANCE_REL,
                      dense_cutoff=DEFAULT_DENSE_CUTOFF, solver="auto"):
    """Smallest eigenpairs of the Laplacian: every zero mode plus ``n_ev`` more.

    ``solver`` is ``"dense"``, ``"iterative"`` (shift-invert Lanczos) or
    ``"auto"``, which goes dense below ``dense_cutoff`` nodes. An explicit
    ``zero_tolerance`` overrides the relative default.
    """
    if n_ev < 1:
        raise ValueError(f"n_ev must be >= 1, got {n_ev}")
    if solver not in ("auto", "dense", "iterative"):
        raise ValueError(f"unknown solver {solver!r}")
    m = lap.size
    sym = lap.symmetric_form()
    use_dense = solver == "dense" or (solver == "auto" and m < dense_cutoff)

    w = u = None
    tol = 0.0
    n_zero = 0
    if not use_dense:
        k = min(n_ev + 2, m - 1)
        while k >= 1:
            w, u = _iterative_eigs(sym, k)
            tol = _tolerance(w, zero_tolerance, zero_tolerance_rel)
            n_zero = int(np.sum(w <= tol))
            if k - n_zero >= n_ev:
                break
            if k == m - 1:
                # ARPACK cannot return all M pairs; finish densely
                use_dense = True
                break
            k = min(2 * k, m - 1)
        else:
            use_dense = True
    if use_dense:
        w, u = _dense_eigs(sym)
        tol = _tolerance(w, zero_tolerance, zero_tolerance_rel)
        n_zero = int(np.sum(w <= tol))

    if len(w) - n_zero < n_ev:
        raise SpectrumExhausted(
            f"requested {n_ev} nonzero eigenpairs but only {len(w) - n_zero} exist "
            f"({n_zero} zero modes, M={m})"
        )
    keep = n_zero + n_ev
    w, u = w[:keep], u[:, :keep]

    v = np.sqrt(lap.degree_vector)[:, None] * u
    v /= np.linalg.norm(v, axis=0)
    v = apply_sign_convention(v)

    resid = np.abs(lap.entries @ v - v * w).max(axis=0)
    scale = np.abs(v).max(axis=0)
    bad = np.flatnonzero(resid >= RESIDUAL_TOL * scale)
    if bad.size:
        raise ConvergenceFailure(
            f"eigenpair residuals above tolerance for columns {bad.tolist()}: {resid[bad]}"
        )

    if n_zero > 1:
        msg = f"graph has {n_zero} components; nonzero eigenvectors start after them"
        logger.warning(msg)
        warnings.warn(msg, DisconnectedGraphWarning, stacklevel=2)

    w = np.array(w)
    w.setflags(write=False)
    v.setflags(write=False)
    return SpectralEmbedding(
        eigenvalues=w,
        eigenvectors=v,
        zero_tolerance=tol,
        n_components=n_zero,
        area_ids=tuple(lap.area_ids),
    )


def select_eigenvector(emb, index):
    """The ``index``-th nonzero eigenvector (1-based) as an area-indexed Series."""
    if index < 1 or index > emb.n_nonzero:
        raise IndexOutOfRange(
            f"eigenvector index {index} outside 1..{emb.n_nonzero} "
            "(zero modes are excluded)"
        )
    col = emb.n_components + index - 1
    return pd.Series(
        np.array(emb.eigenvectors[:, col]),
        index=pd.Index(emb.area_ids, name="area_code"),
        name=f"ev{index}",
    )
