import json

import numpy as np
import pandas as pd
import pytest

from censusdiffmap import io
from censusdiffmap.aggregation import AreaHierarchy
from censusdiffmap.cli import main
from censusdiffmap.errors import PipelineError
from censusdiffmap.pipeline import PipelineConfig, load_config, run_pipeline
from censusdiffmap.synthetic import generate_synthetic


def test_full_run(toy_city_files, tmp_path):
    out = tmp_path / "out"
    res = run_pipeline(PipelineConfig(), toy_city_files["features"], toy_city_files["hierarchy"],
                       toy_city_files["deprivation"], toy_city_files["boundaries"], out)
    for name in ("embedding_oa.csv", "embedding_lsoa.csv", "correlations.json",
                 "confusion.json", "choropleth_oa_map_ev2.geojson",
                 "choropleth_lsoa_map_ev1.geojson"):
        assert (out / name).exists(), name
    assert set(res.correlations) == {"lsoa_map", "oa_map"}
    for corr in res.correlations.values():
        m = np.array(corr["matrix"])
        assert np.allclose(m, m.T) and np.all(np.abs(m) <= 1)
        # orientation makes every eigenvector agree in sign with IMD
        assert all(r >= 0 for r in corr["imd_vs_eigenvector"].values())
    emb = io.read_table(out / "embedding_oa.csv")
    assert list(emb.columns) == ["ev1", "ev2"] and len(emb) == 120
    assert len(io.read_table(out / "embedding_lsoa.csv")) == 30
    conf = json.loads((out / "confusion.json").read_text())
    for c in conf.values():
        assert sum(c[k] for k in ("true_positive", "false_negative",
                                  "false_positive", "true_negative")) == 30


def test_ground_truth_file_and_drilldown(toy_city_files, toy_city, tmp_path):
    table = toy_city[2]
    gt = sorted(table.top_ranked(6))
    (tmp_path / "gt.txt").write_text("\n".join(gt) + "\n")
    # a high threshold guarantees false negatives
    cfg = PipelineConfig(classification_threshold=0.5)
    res = run_pipeline(cfg, toy_city_files["features"], toy_city_files["hierarchy"],
                       toy_city_files["deprivation"], None, tmp_path / "o",
                       ground_truth_path=tmp_path / "gt.txt")
    assert res.confusion["oa_map"]["false_negative"] == 6
    assert res.drilldown.n_members == 24
    assert len(res.fn_diagnostics) == 12
    summary = json.loads((tmp_path / "o" / "fn_drilldown_summary.json").read_text())
    assert summary["member_oas"] == 24
    diag = pd.read_csv(tmp_path / "o" / "fn_diagnostics.csv")
    assert {"lsoa_code", "Crime_rank", "weak_domain_high"} <= set(diag.columns)


def test_embedding_only(toy_city_files, tmp_path):
    res = run_pipeline(PipelineConfig(), toy_city_files["features"], toy_city_files["hierarchy"],
                       None, None, tmp_path)
    assert res.correlations == {}
    assert any("embedding-only" in n for n in res.notes)
    assert (tmp_path / "embedding_oa.csv").exists()
    assert not (tmp_path / "correlations.json").exists()


def test_identity_hierarchy_variants_agree(tmp_path):
    fm, _ = generate_synthetic("line1d", 120, noise=0.05, seed=3)
    io.write_features(fm, tmp_path / "f.csv")
    io.write_hierarchy(AreaHierarchy.identity(fm.area_ids), tmp_path / "h.csv")
    res = run_pipeline(PipelineConfig(), tmp_path / "f.csv", tmp_path / "h.csv", out_dir=tmp_path)
    a = res.embeddings["lsoa_map"]
    b = res.embeddings["oa_map"]
    assert list(a.index) == list(b.index)
    assert np.array_equal(a.to_numpy(), b.to_numpy())


def test_stage_context(tmp_path):
    (tmp_path / "f.csv").write_text("area_code,v\nA,1\nB,x\n")
    (tmp_path / "h.csv").write_text("oa_code,lsoa_code\nA,L\nB,L\n")
    with pytest.raises(PipelineError) as info:
        run_pipeline(PipelineConfig(), tmp_path / "f.csv", tmp_path / "h.csv", out_dir=tmp_path)
    assert info.value.stage == "load features"


class TestConfig:
    def test_parse(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("k_neighbors = 7\nclassification_threshold = 0.1  # note\n"
                     "clamp_coincident = yes\nweak_domains = Crime, Barriers\n"
                     "domain_weights = Income:0.5\n")
        c = load_config(p)
        assert c.k_neighbors == 7 and c.classification_threshold == 0.1
        assert c.clamp_coincident is True
        assert c.weak_domains == {"Crime", "Barriers"}
        assert c.domain_weights["Income"] == 0.5 and c.domain_weights["Crime"] == 0.093

    def test_section_header_and_unknown_key(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[pipeline]\nn_eigenvectors = 4\n")
        assert load_config(p).n_eigenvectors == 4
        p.write_text("bogus = 1\n")
        with pytest.raises(ValueError):
            load_config(p)

    def test_validation(self):
        with pytest.raises(ValueError):
            PipelineConfig(k_neighbors=0)
        with pytest.raises(ValueError):
            PipelineConfig(strong_domains={"Wealth"})


class TestCli:
    def test_synth_embed_aggregate(self, tmp_path, capsys):
        f = tmp_path / "s.csv"
        assert main(["synth", "--kind", "circle", "--size", "60", "--seed", "2",
                     "--out", str(f), "--params-out", str(tmp_path / "p.csv")]) == 0
        assert io.load_features(f).shape == (60, 20)
        emb = tmp_path / "e.csv"
        assert main(["embed", "--features", str(f), "--out", str(emb), "--n-eigenvectors", "3"]) == 0
        assert list(io.read_table(emb).columns) == ["ev1", "ev2", "ev3"]
        assert "eigenvalues" in capsys.readouterr().out
        codes = list(io.read_table(emb).index)
        io.write_hierarchy(AreaHierarchy.from_pairs((c, f"L{i // 3}") for i, c in enumerate(codes)),
                           tmp_path / "h.csv")
        agg = tmp_path / "a.csv"
        assert main(["aggregate", "--input", str(emb), "--hierarchy", str(tmp_path / "h.csv"),
                     "--out", str(agg)]) == 0
        assert len(io.read_table(agg)) == 20

    def test_run_evaluate_classify(self, toy_city_files, tmp_path, capsys):
        out = tmp_path / "run"
        args = ["run", "--features", str(toy_city_files["features"]),
                "--hierarchy", str(toy_city_files["hierarchy"]),
                "--deprivation", str(toy_city_files["deprivation"]),
                "--out-dir", str(out), "--k-neighbors", "8"]
        assert main(args) == 0
        assert "r(IMD)" in capsys.readouterr().out
        common = ["--embedding", str(out / "embedding_oa_on_lsoa.csv"),
                  "--deprivation", str(toy_city_files["deprivation"]),
                  "--map-name", "oa_map", "--out-dir", str(tmp_path / "ev")]
        assert main(["evaluate", *common]) == 0
        assert (tmp_path / "ev" / "correlations.json").exists()
        assert main(["classify", *common, "--threshold", "0.5",
                     "--oa-embedding", str(out / "embedding_oa.csv"),
                     "--hierarchy", str(toy_city_files["hierarchy"])]) == 0
        text = capsys.readouterr().out
        assert "TP=" in text and "drilldown" in text

    def test_error_exit_code(self, tmp_path, capsys):
        (tmp_path / "f.csv").write_text("area_code,v\nA,1\nA,2\n")
        assert main(["embed", "--features", str(tmp_path / "f.csv"),
                     "--out", str(tmp_path / "e.csv")]) == 1
        assert "error" in capsys.readouterr().err
        assert main(["embed", "--features", str(tmp_path / "missing.csv"),
                     "--out", str(tmp_path / "e.csv")]) == 1

    def test_warning_keeps_zero_exit(self, toy_city_files, tmp_path):
        # embedding-only mode warns but succeeds
        assert main(["run", "--features", str(toy_city_files["features"]),
                     "--hierarchy", str(toy_city_files["hierarchy"]),
                     "--out-dir", str(tmp_path)]) == 0

    def test_config_file_overridden_by_flag(self, toy_city_files, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text("n_eigenvectors = 3\nk_neighbors = 4\n")
        assert main(["embed", "--features", str(toy_city_files["features"]),
                     "--out", str(tmp_path / "e.csv"), "--config", str(cfg),
                     "--n-eigenvectors", "2"]) == 0
        assert list(io.read_table(tmp_path / "e.csv").columns) == ["ev1", "ev2"]
