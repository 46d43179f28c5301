"""Command line interface: ``censusdiffmap {synth,embed,aggregate,evaluate,classify,run}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

from . import io
from .aggregation import aggregate_vector
from .errors import DiffmapError
from .pipeline import (
    PipelineConfig,
    _parse_domain_list,
    _parse_weights,
    embed_features,
    evaluate_maps,
    load_config,
    run_pipeline,
)
from .synthetic import KINDS, generate_synthetic

logger = logging.getLogger("censusdiffmap")


def _config_flags(p):
    g = p.add_argument_group("pipeline settings (override --config)")
    g.add_argument("--config", type=Path, help="key = value config file")
    g.add_argument("--k-neighbors", type=int)
    g.add_argument("--n-eigenvectors", type=int)
    g.add_argument("--zero-tolerance-rel", type=float)
    g.add_argument("--threshold", dest="classification_threshold", type=float)
    g.add_argument("--clamp-coincident", action="store_true", default=None)
    g.add_argument("--dense-solver-cutoff", type=int)
    g.add_argument("--deprivation-eigenvector", type=int)
    g.add_argument("--deprived-rank-cutoff", type=int)
    g.add_argument("--rank-percentile", type=float)
    g.add_argument("--rank-total", type=int)
    g.add_argument("--code-property")
    g.add_argument("--strong-domains", type=_parse_domain_list)
    g.add_argument("--weak-domains", type=_parse_domain_list)
    g.add_argument("--domain-weights", type=_parse_weights,
                   help="e.g. Income:0.225,Employment:0.225,...")
    g.add_argument("--jobs", dest="n_jobs", type=int)


_CONFIG_KEYS = (
    "k_neighbors", "n_eigenvectors", "zero_tolerance_rel", "classification_threshold",
    "clamp_coincident", "dense_solver_cutoff", "deprivation_eigenvector",
    "deprived_rank_cutoff", "rank_percentile", "rank_total", "code_property",
    "strong_domains", "weak_domains", "domain_weights", "n_jobs",
)


def _config(args):
    base = load_config(args.config) if args.config else PipelineConfig()
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    if overrides.get("domain_weights"):
        overrides["domain_weights"] = {**base.domain_weights, **overrides["domain_weights"]}
    return base.with_overrides(**overrides)


def cmd_synth(args):
    features, params = generate_synthetic(args.kind, args.size, args.noise, args.seed)
    frame = pd.DataFrame(features.values, index=pd.Index(features.area_ids, name="area_code"),
                         columns=features.column_names)
    io.write_table(frame, args.out)
    if args.params_out:
        io.write_table(pd.DataFrame({"parameter": params}, index=frame.index), args.params_out)
    print(f"wrote {len(frame)} x {frame.shape[1]} {args.kind} sample to {args.out}")


def cmd_embed(args):
    config = _config(args)
    features = io.load_features(args.features, args.id_column)
    emb = embed_features(features, config, n_ev=config.n_eigenvectors)
    io.write_table(emb.to_frame(), args.out)
    print(f"eigenvalues: {' '.join(f'{w:.6g}' for w in emb.eigenvalues)} "
          f"({emb.n_components} zero mode(s))")


def cmd_aggregate(args):
    hierarchy = io.load_hierarchy(args.hierarchy)
    table = io.read_table(args.input, args.id_column)
    out = aggregate_vector(table, hierarchy)
    io.write_table(out, args.out)
    print(f"aggregated {len(table)} areas to {len(out)}")


def _single_map(args):
    frame = io.read_table(args.embedding)
    return {args.map_name: frame}


def cmd_evaluate(args):
    config = _config(args)
    table = io.load_deprivation(args.deprivation)
    ev = evaluate_maps(_single_map(args), table, config)
    io.write_json(ev["correlations"], Path(args.out_dir) / "correlations.json")
    for name, corr in ev["correlations"].items():
        for col, r in corr["imd_vs_eigenvector"].items():
            print(f"{name} {col}: r(IMD) = {r:.4f}")


def cmd_classify(args):
    config = _config(args)
    table = io.load_deprivation(args.deprivation)
    gt = io.load_code_list(args.ground_truth) if args.ground_truth else None
    oa_embedding = hierarchy = None
    if args.oa_embedding:
        if not args.hierarchy:
            raise ValueError("--oa-embedding requires --hierarchy")
        oa_embedding = io.read_table(args.oa_embedding)
        hierarchy = io.load_hierarchy(args.hierarchy)
    ev = evaluate_maps(_single_map(args), table, config, gt, oa_embedding, hierarchy)
    out = Path(args.out_dir)
    io.write_json(ev["confusion"], out / "confusion.json")
    if ev["fn_diagnostics"]:
        io.write_records(ev["fn_diagnostics"], out / "fn_diagnostics.csv")
    if ev["drilldown"] is not None:
        d = ev["drilldown"]
        io.write_records(d.members.to_dict("records"), out / "fn_drilldown.csv",
                         columns=["lsoa_code", "oa_code", "value", "above_threshold"])
        print(f"drilldown: {d.n_members} member OAs, {d.n_above} above threshold")
    for name, c in ev["confusion"].items():
        if "true_positive" in c:
            print(f"{name}: TP={c['true_positive']} FN={c['false_negative']} "
                  f"FP={c['false_positive']} TN={c['true_negative']}")
        else:
            print(f"{name}: {len(c['predicted'])} predicted (no ground truth)")


def cmd_run(args):
    config = _config(args)
    result = run_pipeline(config, args.features, args.hierarchy, args.deprivation,
                          args.boundaries, args.out_dir, args.ground_truth)
    for note in result.notes:
        print(f"notice: {note}")
    for name, corr in result.correlations.items():
        for col, r in corr["imd_vs_eigenvector"].items():
            print(f"{name} {col}: r(IMD) = {r:.4f}")
    for name, c in result.confusion.items():
        if "true_positive" in c:
            print(f"{name}: TP={c['true_positive']} FN={c['false_negative']}")
    print(f"wrote {len(result.files)} file(s) to {args.out_dir}")


def build_parser():
    parser = argparse.ArgumentParser(prog="censusdiffmap",
                                     description="Diffusion-map embeddings of area-level census data.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic manifold feature table")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--size", type=int, default=300)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--params-out", type=Path)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("embed", help="diffusion-map embedding of a feature CSV")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--id-column", default="area_code")
    p.add_argument("--out", type=Path, required=True)
    _config_flags(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("aggregate", help="average an area table up a hierarchy")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--hierarchy", type=Path, required=True)
    p.add_argument("--id-column", default="area_code")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_aggregate)

    for name, func, helptext in (("evaluate", cmd_evaluate, "correlate an LSOA embedding with IMD"),
                                 ("classify", cmd_classify, "threshold classification and diagnostics")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--embedding", type=Path, required=True, help="LSOA-level embedding CSV")
        p.add_argument("--deprivation", type=Path, required=True)
        p.add_argument("--map-name", default="map")
        p.add_argument("--out-dir", type=Path, default=Path("."))
        if name == "classify":
            p.add_argument("--ground-truth", type=Path, help="file of deprived LSOA codes")
            p.add_argument("--oa-embedding", type=Path)
            p.add_argument("--hierarchy", type=Path)
        _config_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("run", help="full pipeline: both maps, evaluation, exports")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--hierarchy", type=Path, required=True)
    p.add_argument("--deprivation", type=Path)
    p.add_argument("--boundaries", type=Path)
    p.add_argument("--ground-truth", type=Path)
    p.add_argument("--out-dir", type=Path, default=Path("out"))
    _config_flags(p)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (DiffmapError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
