"""End-to-end run: both diffusion maps, evaluation, and exported artifacts."""

from __future__ import annotations

import configparser
import contextlib
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .aggregation import aggregate_features, aggregate_vector
from .errors import DiffmapError, PipelineError, UnmappedArea
from .evaluation import (
    DEFAULT_RANK_PERCENTILE,
    DEFAULT_THRESHOLD,
    DEFAULT_WEIGHTS,
    DOMAINS,
    STRONG_DOMAINS,
    WEAK_DOMAINS,
    DeprivationTable,
    classify_deprived,
    combine_domains,
    confusion,
    correlation_matrix,
    fn_domain_diagnostics,
    fn_oa_drilldown,
    pearson,
)
from .graph import DEFAULT_K_NEIGHBORS, build_similarity_graph, pairwise_distances, standardize
from .spectral import (
    DEFAULT_DENSE_CUTOFF,
    DEFAULT_N_EV,
    DEFAULT_ZERO_TOLERANCE_REL,
    build_laplacian,
    compute_embedding,
)

logger = logging.getLogger(__name__)

# 2015 national count of LSOAs in the most deprived decile
DEFAULT_DEPRIVED_RANK_CUTOFF = 3284
MAPS = ("lsoa_map", "oa_map")


@dataclass
class PipelineConfig:
    k_neighbors: int = DEFAULT_K_NEIGHBORS
    n_eigenvectors: int = DEFAULT_N_EV
    zero_tolerance_rel: float = DEFAULT_ZERO_TOLERANCE_REL
    classification_threshold: float = DEFAULT_THRESHOLD
    domain_weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    strong_domains: frozenset = STRONG_DOMAINS
    weak_domains: frozenset = WEAK_DOMAINS
    clamp_coincident: bool = False
    dense_solver_cutoff: int = DEFAULT_DENSE_CUTOFF
    deprivation_eigenvector: int = 2
    deprived_rank_cutoff: int = DEFAULT_DEPRIVED_RANK_CUTOFF
    rank_percentile: float = DEFAULT_RANK_PERCENTILE
    rank_total: int | None = None
    code_property: str = "area_code"
    n_jobs: int = 1

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.n_eigenvectors < 1:
            raise ValueError("n_eigenvectors must be >= 1")
        if self.deprivation_eigenvector < 1:
            raise ValueError("deprivation_eigenvector must be >= 1")
        missing = [d for d in DOMAINS if d not in self.domain_weights]
        if missing:
            raise ValueError(f"domain_weights missing {missing}")
        if any(w <= 0 for w in self.domain_weights.values()):
            raise ValueError("domain weights must be positive")
        self.strong_domains = frozenset(self.strong_domains)
        self.weak_domains = frozenset(self.weak_domains)
        unknown = (self.strong_domains | self.weak_domains) - set(DOMAINS)
        if unknown:
            raise ValueError(f"unknown domains {sorted(unknown)}")

    def with_overrides(self, **overrides):
        """Copy with the non-None entries of ``overrides`` applied."""
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})


def _parse_domain_list(text):
    return frozenset(s.strip() for s in text.split(",") if s.strip())


def _parse_weights(text):
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        name, _, val = part.partition(":")
        out[name.strip()] = float(val)
    return out


def load_config(path):
    """Read ``key = value`` lines (optionally under a ``[pipeline]`` header).

    ``domain_weights`` is written ``Income:0.225, Employment:0.225, ...`` and
    the domain sets as comma-separated names.
    """
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text = "[pipeline]\n" + text
    parser.read_string(text)
    section = parser["pipeline"] if parser.has_section("pipeline") else parser[parser.sections()[0]]
    types = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}
    kwargs = {}
    for key, raw in section.items():
        key = key.strip().replace("-", "_")
        if key not in types:
            raise ValueError(f"unknown config key {key!r} in {path}")
        raw = raw.strip().strip('"').strip("'")
        if key == "domain_weights":
            kwargs[key] = {**DEFAULT_WEIGHTS, **_parse_weights(raw)}
        elif key in ("strong_domains", "weak_domains"):
            kwargs[key] = _parse_domain_list(raw)
        elif key in ("clamp_coincident",):
            kwargs[key] = section.getboolean(key)
        elif key in ("code_property",):
            kwargs[key] = raw
        elif key in ("rank_total",):
            kwargs[key] = None if raw.lower() in ("", "none") else int(raw)
        elif key in ("zero_tolerance_rel", "classification_threshold", "rank_percentile"):
            kwargs[key] = float(raw)
        else:
            kwargs[key] = int(raw)
    return PipelineConfig(**kwargs)


@contextlib.contextmanager
def stage(name):
    try:
        yield
    except PipelineError:
        raise
    except (DiffmapError, ValueError, KeyError, OSError) as exc:
        raise PipelineError(name, exc) from exc


def embed_features(features, config, n_ev=None):
    """standardize -> distances -> top-k graph -> Laplacian -> embedding."""
    n_ev = n_ev or max(config.n_eigenvectors, config.deprivation_eigenvector)
    b = standardize(features)
    d = pairwise_distances(b, n_jobs=config.n_jobs)
    graph = build_similarity_graph(d, config.k_neighbors, area_ids=b.area_ids,
                                   clamp_coincident=config.clamp_coincident)
    del d
    lap = build_laplacian(graph)
    return compute_embedding(lap, n_ev, zero_tolerance_rel=config.zero_tolerance_rel,
                             dense_cutoff=config.dense_solver_cutoff)


def subset_table(table, codes):
    """Restrict a deprivation table to ``codes`` (in the order given)."""
    pos = {c: i for i, c in enumerate(table.lsoa_ids)}
    missing = [c for c in codes if c not in pos]
    if missing:
        raise UnmappedArea(missing)
    idx = np.array([pos[c] for c in codes], dtype=np.intp)
    return DeprivationTable(
        lsoa_ids=list(codes),
        imd_score=table.imd_score[idx],
        domain_scores={d: v[idx] for d, v in table.domain_scores.items()},
        domain_ranks=None if table.domain_ranks is None
        else {d: v[idx] for d, v in table.domain_ranks.items()},
        imd_rank=None if table.imd_rank is None else table.imd_rank[idx],
    )


def orient_frame(frame, reference):
    """Flip each column to correlate non-negatively with ``reference``; returns (frame, signs)."""
    signs = {}
    out = frame.copy()
    for col in frame.columns:
        s = -1.0 if pearson(frame[col].to_numpy(), reference) < 0 else 1.0
        signs[col] = s
        out[col] = frame[col] * s
    return out, signs


@dataclass
class PipelineResult:
    embeddings: dict
    eigenvalues: dict
    correlations: dict = field(default_factory=dict)
    confusion: dict = field(default_factory=dict)
    fn_diagnostics: list = field(default_factory=list)
    drilldown: object = None
    files: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def evaluate_maps(maps, table, config, ground_truth=None, oa_embedding=None, hierarchy=None):
    """Correlations, classification and false-negative diagnostics for LSOA-level maps.

    ``maps`` is name -> LSOA-indexed DataFrame of eigenvectors. The table is
    restricted to the LSOAs the maps cover. Returns a dict of report parts.
    """
    codes = [str(c) for c in next(iter(maps.values())).index]
    for frame in maps.values():
        these = {str(c) for c in frame.index}
        codes = [c for c in codes if c in these]
    in_table = set(table.lsoa_ids)
    uncovered = [c for c in codes if c not in in_table]
    if uncovered:
        logger.warning("%d mapped LSOA(s) have no deprivation row and are not evaluated",
                       len(uncovered))
        codes = [c for c in codes if c in in_table]
    rank_total = config.rank_total or len(table.lsoa_ids)
    with stage("evaluate: align"):
        sub = subset_table(table, codes)
    imd = sub.imd_score
    if ground_truth is None:
        gt = sub.top_ranked(config.deprived_rank_cutoff) if sub.imd_rank is not None else None
    else:
        gt = set(ground_truth) & set(codes)
        dropped = set(ground_truth) - set(codes)
        if dropped:
            logger.warning("%d ground-truth code(s) outside the mapped area ignored", len(dropped))

    ev_col = f"ev{config.deprivation_eigenvector}"
    out = {"correlations": {}, "confusion": {}, "fn_diagnostics": [], "drilldown": None,
           "oriented": {}, "signs": {}}
    with stage("evaluate: correlations"):
        combined = combine_domains(sub, config.domain_weights).to_numpy()
    for name, frame in maps.items():
        frame = frame.reindex(codes)
        oriented, signs = orient_frame(frame, imd)
        out["oriented"][name] = oriented
        out["signs"][name] = signs
        with stage("evaluate: correlations"):
            extra = {f"{name}_{c}": oriented[c].to_numpy() for c in oriented.columns}
            extra["WeightedDomains"] = combined
            names, mat = correlation_matrix(sub, extra)
        key = f"{name}_{ev_col}"
        top = [mat[names.index(key), names.index(d)] for d in sorted(config.strong_domains)] \
            if key in names else []
        out["correlations"][name] = {
            "names": names,
            "matrix": mat.tolist(),
            "imd_vs_eigenvector": {c: float(mat[names.index("IMD"), names.index(f"{name}_{c}")])
                                   for c in oriented.columns},
            "strong_domain_mean": float(np.mean(top)) if top else None,
        }
        if ev_col not in oriented.columns:
            continue
        with stage("evaluate: classify"):
            predicted = classify_deprived(oriented[ev_col], config.classification_threshold)
            entry = {"threshold": config.classification_threshold, "eigenvector": ev_col,
                     "predicted": sorted(predicted), "universe_size": len(codes)}
            if gt is not None:
                conf = confusion(predicted, gt, codes)
                entry.update(conf.as_dict())
                entry["false_negatives"] = sorted(gt - predicted)
            out["confusion"][name] = entry
        if gt is None:
            continue
        fns = gt - predicted
        if sub.domain_ranks is not None:
            with stage("evaluate: fn_diagnostics"):
                recs = fn_domain_diagnostics(fns, sub, config.strong_domains, config.weak_domains,
                                             config.rank_percentile, rank_total)
            for rec in recs:
                rec["map"] = name
                rec["value"] = float(oriented.loc[rec["lsoa_code"], ev_col])
            out["fn_diagnostics"].extend(recs)
        if name == "oa_map" and oa_embedding is not None and hierarchy is not None:
            with stage("evaluate: drilldown"):
                oa_vec = oa_embedding[ev_col] * signs[ev_col]
                out["drilldown"] = fn_oa_drilldown(fns, oa_vec, hierarchy,
                                                   config.classification_threshold)
    return out


def run_pipeline(config, features_path, hierarchy_path, deprivation_path=None,
                 boundaries_path=None, out_dir=".", ground_truth_path=None):
    """Run both diffusion-map variants and write every artifact into ``out_dir``.

    (a) native LSOA map: aggregate raw OA features, then embed.
    (b) OA map: embed OAs, then average eigenvectors up to LSOAs.
    Without a deprivation file only the embeddings are produced.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []

    def written(name):
        files.append(name)
        return out_dir / name

    with stage("load features"):
        features = io.load_features(features_path)
    with stage("load hierarchy"):
        hierarchy = io.load_hierarchy(hierarchy_path)

    with stage("lsoa map"):
        lsoa_emb = embed_features(aggregate_features(features, hierarchy), config)
    with stage("oa map"):
        oa_emb = embed_features(features, config)
    oa_frame = oa_emb.to_frame()
    lsoa_frame = lsoa_emb.to_frame()
    with stage("aggregate oa map"):
        oa_on_lsoa = aggregate_vector(oa_frame, hierarchy)

    io.write_table(oa_frame, written("embedding_oa.csv"))
    io.write_table(lsoa_frame, written("embedding_lsoa.csv"))
    io.write_table(oa_on_lsoa, written("embedding_oa_on_lsoa.csv"))
    eigenvalues = {
        name: {"eigenvalues": emb.eigenvalues.tolist(), "n_components": emb.n_components,
               "zero_tolerance": emb.zero_tolerance}
        for name, emb in (("lsoa_map", lsoa_emb), ("oa_map", oa_emb))
    }
    io.write_json(eigenvalues, written("eigenvalues.json"))

    result = PipelineResult(
        embeddings={"oa": oa_frame, "lsoa_map": lsoa_frame, "oa_map": oa_on_lsoa},
        eigenvalues=eigenvalues,
    )
    maps = {"lsoa_map": lsoa_frame, "oa_map": oa_on_lsoa}

    if deprivation_path is None or not Path(deprivation_path).exists():
        msg = "no deprivation file: embedding-only mode, evaluation skipped"
        logger.warning(msg)
        result.notes.append(msg)
    else:
        with stage("load deprivation"):
            table = io.load_deprivation(deprivation_path)
        gt = None
        if ground_truth_path is not None:
            with stage("load ground truth"):
                gt = io.load_code_list(ground_truth_path)
        ev = evaluate_maps(maps, table, config, gt, oa_embedding=oa_frame, hierarchy=hierarchy)
        result.correlations = ev["correlations"]
        result.confusion = ev["confusion"]
        result.fn_diagnostics = ev["fn_diagnostics"]
        result.drilldown = ev["drilldown"]
        maps = ev["oriented"]
        io.write_json(result.correlations, written("correlations.json"))
        io.write_json(result.confusion, written("confusion.json"))
        if result.fn_diagnostics or table.domain_ranks is not None:
            io.write_records(result.fn_diagnostics, written("fn_diagnostics.csv"),
                             columns=_diagnostic_columns(result.fn_diagnostics))
        if result.drilldown is not None:
            io.write_records(result.drilldown.members.to_dict("records"),
                             written("fn_drilldown.csv"),
                             columns=["lsoa_code", "oa_code", "value", "above_threshold"])
            io.write_json({"member_oas": result.drilldown.n_members,
                           "above_threshold": result.drilldown.n_above,
                           "below_threshold": result.drilldown.n_below},
                          written("fn_drilldown_summary.json"))

    if boundaries_path is not None:
        with stage("export choropleth"):
            boundaries = io.load_boundaries(boundaries_path, config.code_property)
            for name, frame in maps.items():
                for col in frame.columns:
                    io.export_choropleth(frame[col], boundaries,
                                         written(f"choropleth_{name}_{col}.geojson"),
                                         code_property=config.code_property)
    result.files = files
    return result


def _diagnostic_columns(records):
    base = ["map", "lsoa_code", "value", "imd_rank"]
    ranks = [f"{d}_rank" for d in DOMAINS]
    cols = base + ranks + ["weak_domain_high", "strong_domain_low"]
    present = set().union(*(r.keys() for r in records)) if records else set(cols)
    return [c for c in cols if c in present]


__all__ = ["PipelineConfig", "PipelineResult", "load_config", "embed_features",
           "evaluate_maps", "run_pipeline", "subset_table", "orient_frame", "MAPS"]
