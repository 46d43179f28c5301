"""CSV/GeoJSON readers and writers.

Every writer goes through a temp file + rename so a crash never leaves a
truncated output behind.
"""

from __future__ import annotations

import contextlib
import json
import logging
import os
import tempfile
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from .aggregation import AreaHierarchy
from .errors import (
    ConflictingMapping,
    DuplicateAreaId,
    InvalidGeoJSON,
    MalformedRow,
    MissingDomainColumn,
    MissingIdColumn,
    NonNumericCell,
)
from .evaluation import DOMAINS, DeprivationTable
from .graph import FeatureMatrix

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

# CSV column -> domain name
DOMAIN_COLUMNS = {
    "income": "Income",
    "employment": "Employment",
    "health": "Health",
    "education": "Education",
    "barriers": "Barriers",
    "crime": "Crime",
    "living_env": "LivingEnvironment",
}
COLUMN_FOR_DOMAIN = {v: k for k, v in DOMAIN_COLUMNS.items()}


@contextlib.contextmanager
def atomic_write(path, mode="w", encoding="utf-8", newline=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        kwargs = {} if "b" in mode else {"encoding": encoding, "newline": newline}
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _read_text_csv(path):
    # everything as text so empty and non-numeric cells can be reported precisely
    return pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")


def _numeric(frame, columns, row_labels):
    out = np.empty((len(frame), len(columns)))
    for j, col in enumerate(columns):
        raw = frame[col].str.strip().to_numpy(dtype=str)
        try:
            # numpy's string cast is correctly rounded; pandas' fast parser is not
            num = raw.astype(float)
        except ValueError:
            num = pd.to_numeric(pd.Series(raw), errors="coerce").to_numpy(dtype=float, na_value=np.nan)
        bad = ~np.isfinite(num)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise NonNumericCell(row_labels[i], col, frame[col].iloc[i])
        out[:, j] = num
    return out


def load_features(path, id_column="area_code"):
    """Read an area x variable CSV. Empty cells are errors; nothing is imputed."""
    frame = _read_text_csv(path)
    if id_column not in frame.columns:
        raise MissingIdColumn(f"id column {id_column!r} not found in {path}")
    ids = frame[id_column].str.strip().tolist()
    dup = pd.Index(ids)[pd.Index(ids).duplicated()].unique().tolist()
    if dup:
        raise DuplicateAreaId(f"duplicate area codes in {path}: {dup[:10]}")
    columns = [c for c in frame.columns if c != id_column]
    values = _numeric(frame, columns, ids)
    return FeatureMatrix(area_ids=ids, values=values, column_names=columns)


def load_hierarchy(path):
    frame = _read_text_csv(path)
    for col in ("oa_code", "lsoa_code"):
        if col not in frame.columns:
            raise MalformedRow(f"hierarchy file {path} lacks column {col!r}")
    pairs = []
    for n, (oa, lsoa) in enumerate(zip(frame["oa_code"], frame["lsoa_code"]), start=2):
        oa, lsoa = oa.strip(), lsoa.strip()
        if not oa or not lsoa:
            raise MalformedRow(f"{path}:{n}: empty oa_code or lsoa_code")
        pairs.append((oa, lsoa))
    try:
        return AreaHierarchy.from_pairs(pairs)
    except ConflictingMapping as exc:
        raise ConflictingMapping(f"{path}: {exc}") from None


def load_deprivation(path):
    """Read IMD and domain scores keyed by ``lsoa_code``; ``*_rank`` columns are optional."""
    frame = _read_text_csv(path)
    for col in ("lsoa_code", "imd_score"):
        if col not in frame.columns:
            raise MalformedRow(f"deprivation file {path} lacks column {col!r}")
    for col, domain in DOMAIN_COLUMNS.items():
        if col not in frame.columns:
            raise MissingDomainColumn(domain)
    ids = frame["lsoa_code"].str.strip().tolist()
    if len(set(ids)) != len(ids):
        raise MalformedRow(f"duplicate lsoa_code values in {path}")
    if any(not c for c in ids):
        raise MalformedRow(f"empty lsoa_code in {path}")

    def col(name, as_int=False):
        try:
            v = _numeric(frame, [name], ids)[:, 0]
        except NonNumericCell as exc:
            raise MalformedRow(str(exc)) from exc
        if as_int:
            if np.any(v != np.round(v)) or np.any(v < 1):
                raise MalformedRow(f"{name} must hold positive integers")
            return v.astype(np.int64)
        return v

    scores = {d: col(c) for c, d in DOMAIN_COLUMNS.items()}
    ranks = {d: col(f"{c}_rank", True) for c, d in DOMAIN_COLUMNS.items()
             if f"{c}_rank" in frame.columns}
    imd_rank = col("imd_rank", True) if "imd_rank" in frame.columns else None
    return DeprivationTable(
        lsoa_ids=ids,
        imd_score=col("imd_score"),
        domain_scores=scores,
        domain_ranks=ranks or None,
        imd_rank=imd_rank,
    )


def load_code_list(path):
    """One area code per line; blank lines and ``#`` comments are skipped."""
    codes = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                codes.append(line.split(",")[0].strip())
    return codes


def write_table(frame, path):
    """Write an area-indexed DataFrame (index becomes ``area_code``)."""
    frame = frame.copy()
    frame.index = frame.index.rename("area_code")
    with atomic_write(path, newline="") as fh:
        frame.to_csv(fh, float_format=FLOAT_FORMAT, lineterminator="\n")


def read_table(path, id_column="area_code"):
    frame = pd.read_csv(path, dtype={id_column: str}, float_precision="round_trip")
    if id_column not in frame.columns:
        raise MissingIdColumn(f"id column {id_column!r} not found in {path}")
    return frame.set_index(id_column)


def write_records(records, path, columns=None):
    frame = pd.DataFrame.from_records(records, columns=columns)
    for c in frame.columns:
        if frame[c].map(lambda v: isinstance(v, (list, tuple, set))).any():
            frame[c] = frame[c].map(lambda v: ";".join(v) if isinstance(v, (list, tuple, set)) else v)
    with atomic_write(path, newline="") as fh:
        frame.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_features(features, path):
    frame = pd.DataFrame(features.values, columns=list(features.column_names),
                         index=pd.Index(features.area_ids, name="area_code"))
    write_table(frame, path)


def write_hierarchy(hierarchy, path):
    frame = pd.DataFrame({"oa_code": list(hierarchy.oa_to_lsoa),
                          "lsoa_code": list(hierarchy.oa_to_lsoa.values())})
    with atomic_write(path, newline="") as fh:
        frame.to_csv(fh, index=False, lineterminator="\n")


def write_deprivation(table, path):
    cols = {"lsoa_code": list(table.lsoa_ids), "imd_score": table.imd_score}
    if table.imd_rank is not None:
        cols["imd_rank"] = table.imd_rank
    for col, domain in DOMAIN_COLUMNS.items():
        cols[col] = table.domain_scores[domain]
    for col, domain in DOMAIN_COLUMNS.items():
        if table.domain_ranks and domain in table.domain_ranks:
            cols[f"{col}_rank"] = table.domain_ranks[domain]
    with atomic_write(path, newline="") as fh:
        pd.DataFrame(cols).to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(_jsonable(v) for v in obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_json(obj, path):
    with atomic_write(path) as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_boundaries(path, code_property="area_code"):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidGeoJSON(f"{path}: {exc}") from exc
    validate_boundaries(data, code_property)
    return data


def validate_boundaries(data, code_property="area_code"):
    if not isinstance(data, dict) or data.get("type") != "FeatureCollection":
        raise InvalidGeoJSON("expected a GeoJSON FeatureCollection")
    features = data.get("features")
    if not isinstance(features, list):
        raise InvalidGeoJSON("FeatureCollection has no 'features' list")
    seen = set()
    for n, feat in enumerate(features):
        if not isinstance(feat, dict) or feat.get("type") != "Feature":
            raise InvalidGeoJSON(f"feature {n} is not a GeoJSON Feature")
        geom = feat.get("geometry")
        if geom is not None and (not isinstance(geom, dict) or "type" not in geom):
            raise InvalidGeoJSON(f"feature {n} has malformed geometry")
        props = feat.get("properties") or {}
        if code_property not in props:
            raise InvalidGeoJSON(f"feature {n} lacks property {code_property!r}")
        code = str(props[code_property])
        if code in seen:
            raise InvalidGeoJSON(f"area code {code!r} appears twice")
        seen.add(code)


def export_choropleth(vector, boundaries, out_path, code_property="area_code",
                      value_property="value"):
    """Write the boundary features that match ``vector`` with a value property added.

    ``boundaries`` is a parsed FeatureCollection or a path to one. Vector codes
    without a boundary are skipped with a warning. Returns
    ``{"written": n, "missing": [codes]}``.
    """
    if not isinstance(boundaries, dict):
        boundaries = load_boundaries(boundaries, code_property)
    else:
        validate_boundaries(boundaries, code_property)
    values = {str(k): float(v) for k, v in zip(vector.index, np.asarray(vector, dtype=float))}
    if not values:
        warnings.warn("empty vector: writing an empty feature collection", stacklevel=2)
    by_code = {str(f["properties"][code_property]): f for f in boundaries["features"]}
    missing = [c for c in values if c not in by_code]
    if missing:
        msg = f"{len(missing)} area(s) have no boundary and were skipped"
        logger.warning(msg)
        warnings.warn(msg, stacklevel=2)
    out_features = []
    for code, val in values.items():
        feat = by_code.get(code)
        if feat is None:
            continue
        props = dict(feat.get("properties") or {})
        props[value_property] = val
        out_features.append({"type": "Feature", "properties": props,
                             "geometry": feat.get("geometry")})
    collection = {"type": "FeatureCollection", "features": out_features}
    with atomic_write(out_path) as fh:
        # repr-precision floats survive a round trip
        json.dump(collection, fh)
        fh.write("\n")
    return {"written": len(out_features), "missing": missing}


def read_choropleth(path, code_property="area_code", value_property="value"):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    codes = [str(f["properties"][code_property]) for f in data["features"]]
    vals = [float(f["properties"][value_property]) for f in data["features"]]
    return pd.Series(vals, index=pd.Index(codes, name="area_code"), name=value_property)


__all__ = [
    "DOMAIN_COLUMNS", "COLUMN_FOR_DOMAIN", "DOMAINS", "atomic_write",
    "load_features", "load_hierarchy", "load_deprivation", "load_code_list",
    "write_table", "read_table", "write_records", "write_json",
    "write_features", "write_hierarchy", "write_deprivation",
    "load_boundaries", "export_choropleth", "read_choropleth",
]
