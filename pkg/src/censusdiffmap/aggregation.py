"""OA -> LSOA aggregation by unweighted member means."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ConflictingMapping, EmptyLSOA, UnmappedArea
from .graph import FeatureMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AreaHierarchy:
    """Many-to-one lookup from small areas (OAs) to parent areas (LSOAs)."""

    oa_to_lsoa: dict
    lsoa_ids: tuple

    def __post_init__(self):
        mapping = {str(k): str(v) for k, v in self.oa_to_lsoa.items()}
        object.__setattr__(self, "oa_to_lsoa", mapping)
        object.__setattr__(self, "lsoa_ids", tuple(str(x) for x in self.lsoa_ids))
        if len(set(self.lsoa_ids)) != len(self.lsoa_ids):
            raise ValueError("lsoa_ids contains duplicates")
        parents = set(mapping.values())
        unknown = parents - set(self.lsoa_ids)
        if unknown:
            raise ValueError(f"OAs map to LSOAs not in lsoa_ids: {sorted(unknown)[:10]}")
        childless = [x for x in self.lsoa_ids if x not in parents]
        if childless:
            raise EmptyLSOA(f"LSOAs without member OAs: {childless[:10]}")

    @classmethod
    def from_pairs(cls, pairs):
        """Build from ``(oa_code, lsoa_code)`` pairs; LSOAs keep first-seen order.

        Repeated identical pairs are tolerated, conflicting ones are not.
        """
        mapping, order = {}, {}
        for oa, lsoa in pairs:
            oa, lsoa = str(oa), str(lsoa)
            prev = mapping.get(oa)
            if prev is not None and prev != lsoa:
                raise ConflictingMapping(f"OA {oa!r} maps to both {prev!r} and {lsoa!r}")
            mapping[oa] = lsoa
            order.setdefault(lsoa, None)
        return cls(oa_to_lsoa=mapping, lsoa_ids=tuple(order))

    @classmethod
    def identity(cls, codes):
        codes = [str(c) for c in codes]
        return cls(oa_to_lsoa={c: c for c in codes}, lsoa_ids=tuple(codes))

    @property
    def n_oas(self):
        return len(self.oa_to_lsoa)

    @property
    def n_lsoas(self):
        return len(self.lsoa_ids)

    def members(self, lsoa):
        return [oa for oa, parent in self.oa_to_lsoa.items() if parent == lsoa]

    def lsoa_identity(self):
        """The identity hierarchy on this hierarchy's LSOAs."""
        return AreaHierarchy.identity(self.lsoa_ids)


def _group_index(oa_ids, hierarchy):
    missing = [oa for oa in oa_ids if oa not in hierarchy.oa_to_lsoa]
    if missing:
        raise UnmappedArea(missing)
    present = set(oa_ids)
    absent = [oa for oa in hierarchy.oa_to_lsoa if oa not in present]
    if absent:
        msg = f"{len(absent)} OA(s) in the hierarchy have no data and are ignored"
        logger.warning(msg)
        warnings.warn(msg, stacklevel=3)
    pos = {lsoa: i for i, lsoa in enumerate(hierarchy.lsoa_ids)}
    groups = np.fromiter((pos[hierarchy.oa_to_lsoa[oa]] for oa in oa_ids),
                         dtype=np.intp, count=len(oa_ids))
    counts = np.bincount(groups, minlength=len(pos))
    empty = [hierarchy.lsoa_ids[i] for i in np.flatnonzero(counts == 0)]
    if empty:
        raise EmptyLSOA(f"{len(empty)} LSOA(s) have no member values: {empty[:10]}")
    return groups, counts


def _group_means(values, groups, counts):
    out = np.zeros((len(counts),) + values.shape[1:])
    np.add.at(out, groups, values)
    return out / counts.reshape((-1,) + (1,) * (values.ndim - 1))


def aggregate_vector(oa_vector, hierarchy):
    """Average an OA-indexed Series (or DataFrame, column-wise) up to LSOAs.

    The result is indexed by ``hierarchy.lsoa_ids``.
    """
    oa_ids = [str(i) for i in oa_vector.index]
    groups, counts = _group_index(oa_ids, hierarchy)
    means = _group_means(np.asarray(oa_vector, dtype=float), groups, counts)
    index = pd.Index(hierarchy.lsoa_ids, name=oa_vector.index.name or "area_code")
    if isinstance(oa_vector, pd.DataFrame):
        return pd.DataFrame(means, index=index, columns=oa_vector.columns)
    return pd.Series(means, index=index, name=oa_vector.name)


def aggregate_features(oa_features, hierarchy):
    """Per-LSOA column means of a raw OA feature matrix.

    Aggregation must precede standardization, so standardized input is refused.
    """
    if oa_features.standardized:
        raise ValueError("aggregate raw features, then standardize at LSOA level")
    groups, counts = _group_index(list(oa_features.area_ids), hierarchy)
    means = _group_means(oa_features.values, groups, counts)
    return FeatureMatrix(
        area_ids=hierarchy.lsoa_ids,
        values=means,
        column_names=oa_features.column_names,
        warnings=oa_features.warnings,
    )
