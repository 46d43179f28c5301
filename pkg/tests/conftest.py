import numpy as np
import pytest
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from censusdiffmap import io
from censusdiffmap.graph import SimilarityGraph, build_similarity_graph
from censusdiffmap.synthetic import generate_toy_city

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record a pass/fail line for the acceptance summary, then assert."""

    def check(label, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] {label}" + (f"  ({detail})" if detail else ""))
        assert ok, f"{label}: {detail}"

    return check


def knn_graph_from_points(points, k, ids=None):
    return build_similarity_graph(cdist(points, points), k, area_ids=ids)


def random_graph(rng, m_max=200, disconnected=False):
    """Union-of-top-k graph on a random point cloud, optionally split into far-apart blobs."""
    k = int(rng.integers(1, 11))
    if disconnected:
        n_blobs = int(rng.integers(2, 5))
        # blobs larger than k keep every top-k neighbour inside the blob
        sizes = rng.integers(k + 2, max(k + 3, m_max // n_blobs), size=n_blobs)
        dim = int(rng.integers(2, 6))
        pts = np.vstack([rng.standard_normal((s, dim)) + 1e3 * b
                         for b, s in enumerate(sizes)])
    else:
        m = int(rng.integers(5, m_max + 1))
        dim = int(rng.integers(1, 8))
        pts = rng.standard_normal((m, dim)) * rng.uniform(0.1, 10, size=dim)
    return knn_graph_from_points(pts, k), k


def weighted_graph(edges, n, ids=None):
    rows, cols, vals = [], [], []
    for i, j, w in edges:
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    w = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return SimilarityGraph(ids or tuple(str(i) for i in range(n)), w)


@pytest.fixture
def toy_city():
    return generate_toy_city(n_lsoa=30, oas_per_lsoa=4, n_features=25, seed=3)


@pytest.fixture
def toy_city_files(tmp_path, toy_city):
    features, hierarchy, table, boundaries = toy_city
    paths = {
        "features": tmp_path / "features.csv",
        "hierarchy": tmp_path / "hierarchy.csv",
        "deprivation": tmp_path / "deprivation.csv",
        "boundaries": tmp_path / "boundaries.geojson",
    }
    io.write_features(features, paths["features"])
    io.write_hierarchy(hierarchy, paths["hierarchy"])
    io.write_deprivation(table, paths["deprivation"])
    io.write_json(boundaries, paths["boundaries"])
    return paths
