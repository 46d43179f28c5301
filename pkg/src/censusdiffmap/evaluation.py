"""Scoring an embedding against deprivation data.

Pearson correlations, domain heatmap matrices, weighted domain combination,
threshold classification, confusion counts, and false-negative diagnostics.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (
    CodeOutsideUniverse,
    ConstantSeries,
    DataIntegrityWarning,
    LengthMismatch,
    MissingDomain,
    RanksMissing,
    UnmappedArea,
)

logger = logging.getLogger(__name__)

DOMAINS = ("Income", "Employment", "Health", "Education", "Barriers", "Crime",
           "LivingEnvironment")
DEFAULT_WEIGHTS = {
    "Income": 0.225,
    "Employment": 0.225,
    "Health": 0.135,
    "Education": 0.135,
    "Barriers": 0.093,
    "LivingEnvironment": 0.093,
    "Crime": 0.093,
}
STRONG_DOMAINS = frozenset({"Income", "Employment", "Health", "Education"})
WEAK_DOMAINS = frozenset({"Barriers", "Crime", "LivingEnvironment"})
DEFAULT_THRESHOLD = 0.02365
DEFAULT_RANK_PERCENTILE = 0.10


@dataclass(frozen=True)
class DeprivationTable:
    """IMD score plus the seven domain scores (and optionally ranks) per LSOA.

    Rank 1 is the most deprived area.
    """

    lsoa_ids: tuple
    imd_score: np.ndarray
    domain_scores: dict
    domain_ranks: dict | None = None
    imd_rank: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.lsoa_ids)
        object.__setattr__(self, "lsoa_ids", tuple(str(x) for x in self.lsoa_ids))
        if len(set(self.lsoa_ids)) != n:
            raise ValueError("duplicate LSOA codes in deprivation table")
        object.__setattr__(self, "imd_score", np.asarray(self.imd_score, dtype=float))
        if self.imd_score.shape != (n,):
            raise LengthMismatch("imd_score length does not match lsoa_ids")
        missing = [d for d in DOMAINS if d not in self.domain_scores]
        if missing:
            raise MissingDomain(f"missing domain scores: {missing}")
        unknown = set(self.domain_scores) - set(DOMAINS)
        if unknown:
            raise ValueError(f"unknown domains: {sorted(unknown)}")
        scores = {d: np.asarray(self.domain_scores[d], dtype=float) for d in DOMAINS}
        for d, v in scores.items():
            if v.shape != (n,):
                raise LengthMismatch(f"{d} scores length does not match lsoa_ids")
        object.__setattr__(self, "domain_scores", scores)
        if self.domain_ranks is not None:
            ranks = {d: np.asarray(v, dtype=np.int64) for d, v in self.domain_ranks.items()}
            for d, v in ranks.items():
                if d not in DOMAINS:
                    raise ValueError(f"unknown domain {d!r} in ranks")
                if v.shape != (n,) or np.any(v < 1):
                    raise ValueError(f"{d} ranks must be positive integers, one per LSOA")
            object.__setattr__(self, "domain_ranks", ranks)
        if self.imd_rank is not None:
            r = np.asarray(self.imd_rank, dtype=np.int64)
            if r.shape != (n,) or np.any(r < 1):
                raise ValueError("imd_rank must be positive integers, one per LSOA")
            object.__setattr__(self, "imd_rank", r)

    def series(self):
        """IMD then the domains, as name -> Series indexed by LSOA code."""
        idx = pd.Index(self.lsoa_ids, name="area_code")
        out = {"IMD": pd.Series(self.imd_score, index=idx, name="IMD")}
        for d in DOMAINS:
            out[d] = pd.Series(self.domain_scores[d], index=idx, name=d)
        return out

    def top_ranked(self, cutoff):
        """LSOA codes with IMD rank <= ``cutoff`` (e.g. the national top 10%)."""
        if self.imd_rank is None:
            raise RanksMissing("imd_rank column not present")
        return {c for c, r in zip(self.lsoa_ids, self.imd_rank) if r <= cutoff}


@dataclass
class Confusion:
    true_positive: int
    false_negative: int
    false_positive: int
    true_negative: int

    def as_dict(self):
        return {
            "true_positive": self.true_positive,
            "false_negative": self.false_negative,
            "false_positive": self.false_positive,
            "true_negative": self.true_negative,
        }


@dataclass
class EvaluationReport:
    correlations: dict = field(default_factory=dict)
    confusion: Confusion | None = None
    threshold: float = DEFAULT_THRESHOLD
    fn_diagnostics: list = field(default_factory=list)


def pearson(x, y):
    """Sample Pearson correlation coefficient of two equal-length vectors."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise LengthMismatch(f"lengths differ: {x.size} vs {y.size}")
    if x.size < 2:
        raise LengthMismatch("need at least 2 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = np.dot(dx, dx)
    syy = np.dot(dy, dy)
    if sxx == 0 or syy == 0 or np.all(x == x[0]) or np.all(y == y[0]):
        raise ConstantSeries("correlation undefined for a constant series")
    denom = sxx * syy
    denom = math.sqrt(denom) if math.isfinite(denom) and denom > 0 else math.sqrt(sxx) * math.sqrt(syy)
    r = np.dot(dx, dy) / denom
    return float(min(1.0, max(-1.0, r)))


def _align(series, index, name):
    s = pd.Series(series) if not isinstance(series, pd.Series) else series
    if len(s) != len(index):
        raise LengthMismatch(f"series {name!r} has {len(s)} values, expected {len(index)}")
    if isinstance(series, pd.Series) and not s.index.equals(index):
        missing = set(index) - set(s.index)
        if missing:
            raise UnmappedArea(missing)
        s = s.reindex(index)
    return np.asarray(s, dtype=float)


def correlation_matrix(table, extra_series=None):
    """Pairwise Pearson r over IMD, the 7 domains and any extra series.

    ``extra_series`` maps a name to an LSOA-indexed Series (reindexed onto the
    table's LSOA order) or a plain vector already in that order.
    Returns ``(names, matrix)``; use :func:`correlations_as_dict` for the
    pair-keyed form.
    """
    idx = pd.Index(table.lsoa_ids)
    named = {k: np.asarray(v, dtype=float) for k, v in table.series().items()}
    for name, s in (extra_series or {}).items():
        named[name] = _align(s, idx, name)
    names = list(named)
    n = len(names)
    mat = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            mat[i, j] = mat[j, i] = pearson(named[names[i]], named[names[j]])
    return names, mat


def correlations_as_dict(names, matrix):
    return {(a, b): float(matrix[i, j]) for i, a in enumerate(names)
            for j, b in enumerate(names)}


def combine_domains(table, weights=None):
    """Weighted sum of domain scores with weights renormalized to sum to 1.

    A sensitivity-analysis utility; official IMD applies rank transforms first.
    """
    weights = dict(DEFAULT_WEIGHTS if weights is None else weights)
    missing = [d for d in DOMAINS if d not in weights]
    if missing:
        raise MissingDomain(f"weights missing for domains: {missing}")
    w = np.array([weights[d] for d in DOMAINS], dtype=float)
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative with a positive sum")
    w = w / w.sum()
    scores = np.column_stack([table.domain_scores[d] for d in DOMAINS])
    return pd.Series(scores @ w, index=pd.Index(table.lsoa_ids, name="area_code"),
                     name="combined")


def orient(eigvec, reference):
    """Flip ``eigvec`` if needed so that it correlates non-negatively with ``reference``."""
    if isinstance(reference, pd.Series) and isinstance(eigvec, pd.Series):
        reference = _align(reference, eigvec.index, "reference")
    if pearson(eigvec, reference) < 0:
        return -eigvec
    return eigvec


def classify_deprived(eigvec, threshold=DEFAULT_THRESHOLD):
    """Codes whose (already oriented) component is >= ``threshold``."""
    v = np.asarray(eigvec, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("eigenvector contains non-finite values")
    return {str(c) for c, x in zip(eigvec.index, v) if x >= threshold}


def threshold_for_count(eigvec, count):
    """Largest threshold that classifies at least ``count`` areas as deprived."""
    v = np.sort(np.asarray(eigvec, dtype=float))[::-1]
    if not 1 <= count <= v.size:
        raise ValueError(f"count must be in 1..{v.size}")
    return float(v[count - 1])


def confusion(predicted, ground_truth, universe):
    predicted, ground_truth, universe = set(predicted), set(ground_truth), set(universe)
    outside = (predicted | ground_truth) - universe
    if outside:
        raise CodeOutsideUniverse(f"codes outside the universe: {sorted(outside)[:10]}")
    tp = len(predicted & ground_truth)
    fn = len(ground_truth - predicted)
    fp = len(predicted - ground_truth)
    return Confusion(tp, fn, fp, len(universe) - tp - fn - fp)


def fn_domain_diagnostics(fns, table, strong_domains=STRONG_DOMAINS, weak_domains=WEAK_DOMAINS,
                          percentile=DEFAULT_RANK_PERCENTILE, rank_total=None):
    """Domain ranks of each false-negative LSOA with explanatory flags.

    With cutoff ``percentile * rank_total`` (``rank_total`` defaults to the
    number of LSOAs in ``table``), a weak domain is flagged when its rank is
    inside the cutoff (highly deprived but poorly reflected by the embedding)
    and a strong domain is flagged when its rank is outside it.
    """
    if not fns:
        return []
    if table.domain_ranks is None:
        raise RanksMissing("deprivation table has no domain ranks")
    strong, weak = set(strong_domains), set(weak_domains)
    needed = (strong | weak) - set(table.domain_ranks)
    if needed:
        raise RanksMissing(f"ranks missing for domains: {sorted(needed)}")
    total = len(table.lsoa_ids) if rank_total is None else rank_total
    cutoff = percentile * total
    pos = {c: i for i, c in enumerate(table.lsoa_ids)}
    unknown = [c for c in fns if c not in pos]
    if unknown:
        raise UnmappedArea(unknown)

    records = []
    for code in sorted(fns, key=pos.get):
        i = pos[code]
        rec = {"lsoa_code": code}
        if table.imd_rank is not None:
            rec["imd_rank"] = int(table.imd_rank[i])
        weak_flags, strong_flags = [], []
        for d in DOMAINS:
            if d not in table.domain_ranks:
                continue
            r = int(table.domain_ranks[d][i])
            rec[f"{d}_rank"] = r
            if d in weak and r <= cutoff:
                weak_flags.append(d)
            if d in strong and r > cutoff:
                strong_flags.append(d)
        rec["weak_domain_high"] = weak_flags
        rec["strong_domain_low"] = strong_flags
        records.append(rec)
    return records


@dataclass
class Drilldown:
    """Member-OA breakdown of false-negative LSOAs."""

    members: pd.DataFrame
    n_members: int
    n_above: int

    @property
    def n_below(self):
        return self.n_members - self.n_above


def fn_oa_drilldown(fns, oa_eigvec, hierarchy, threshold=DEFAULT_THRESHOLD):
    """List each false-negative LSOA's member OAs and whether they clear ``threshold``."""
    oa_ids = [str(c) for c in oa_eigvec.index]
    unmapped = [c for c in oa_ids if c not in hierarchy.oa_to_lsoa]
    if unmapped:
        raise UnmappedArea(unmapped)
    unknown = [c for c in fns if c not in set(hierarchy.lsoa_ids)]
    if unknown:
        raise UnmappedArea(unknown)
    values = dict(zip(oa_ids, np.asarray(oa_eigvec, dtype=float)))
    rows = []
    order = {c: i for i, c in enumerate(hierarchy.lsoa_ids)}
    for lsoa in sorted(fns, key=order.get):
        members = [oa for oa in hierarchy.members(lsoa) if oa in values]
        flags = [values[oa] >= threshold for oa in members]
        if members and all(flags):
            msg = (f"every member OA of false-negative LSOA {lsoa} is above threshold; "
                   "LSOA value and OA values are inconsistent")
            logger.warning(msg)
            warnings.warn(msg, DataIntegrityWarning, stacklevel=2)
        for oa, above in zip(members, flags):
            rows.append({"lsoa_code": lsoa, "oa_code": oa, "value": values[oa],
                         "above_threshold": bool(above)})
    frame = pd.DataFrame(rows, columns=["lsoa_code", "oa_code", "value", "above_threshold"])
    return Drilldown(members=frame, n_members=len(frame),
                     n_above=int(frame["above_threshold"].sum()) if len(frame) else 0)


def top_domain_mean(correlations, eigvec_name, domains=tuple(sorted(STRONG_DOMAINS))):
    """Mean correlation between ``eigvec_name`` and the given domains."""
    return float(np.mean([correlations[(eigvec_name, d)] for d in domains]))


__all__ = [
    "DOMAINS", "DEFAULT_WEIGHTS", "STRONG_DOMAINS", "WEAK_DOMAINS", "DEFAULT_THRESHOLD",
    "DeprivationTable", "Confusion", "EvaluationReport", "Drilldown",
    "pearson", "correlation_matrix", "correlations_as_dict", "combine_domains", "orient",
    "classify_deprived", "threshold_for_count", "confusion", "fn_domain_diagnostics",
    "fn_oa_drilldown", "top_domain_mean",
]
