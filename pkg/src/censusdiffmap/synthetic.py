"""Synthetic manifolds in a 20-dimensional ambient space, for recovery tests."""

from __future__ import annotations

import numpy as np
from scipy.stats import ortho_group

from .errors import UnknownKind
from .graph import FeatureMatrix

AMBIENT_DIM = 20
KINDS = ("line1d", "circle", "two_clusters")

LINE_LENGTH = 10.0
CIRCLE_RADIUS = 5.0
CLUSTER_SEPARATION = 50.0


def generate_synthetic(kind, size, noise=0.0, seed=0, separation=CLUSTER_SEPARATION):
    """Sample ``size`` points from a named manifold and return ``(features, params)``.

    The intrinsic coordinates are rotated into ``AMBIENT_DIM`` dimensions by a
    seed-fixed random orthogonal matrix, shifted by a fixed offset, and then
    perturbed by isotropic Gaussian noise of std ``noise``.

    ``params`` holds the ground truth per point: arc position in ``[0, 10]``
    for ``line1d``, angle in ``[0, 2*pi)`` for ``circle``, and the 0/1 label
    for ``two_clusters`` (points ``separation`` apart along one axis, unit
    spread in two intrinsic dimensions).
    """
    if kind not in KINDS:
        raise UnknownKind(f"unknown synthetic kind {kind!r}; expected one of {KINDS}")
    if size < 10:
        raise ValueError(f"size must be >= 10, got {size}")
    rng = np.random.default_rng(seed)
    intrinsic = np.zeros((size, AMBIENT_DIM))
    if kind == "line1d":
        params = rng.uniform(0.0, LINE_LENGTH, size)
        intrinsic[:, 0] = params
    elif kind == "circle":
        params = rng.uniform(0.0, 2 * np.pi, size)
        intrinsic[:, 0] = CIRCLE_RADIUS * np.cos(params)
        intrinsic[:, 1] = CIRCLE_RADIUS * np.sin(params)
    else:
        params = (np.arange(size) >= size // 2).astype(float)
        intrinsic[:, :2] = rng.standard_normal((size, 2))
        intrinsic[:, 0] += separation * params

    rotation = ortho_group.rvs(AMBIENT_DIM, random_state=rng)
    offset = rng.uniform(-1.0, 1.0, AMBIENT_DIM)
    points = intrinsic @ rotation.T + offset
    if noise > 0:
        points = points + noise * rng.standard_normal(points.shape)

    width = len(str(size - 1))
    features = FeatureMatrix(
        area_ids=[f"S{i:0{width}d}" for i in range(size)],
        values=points,
        column_names=[f"x{j + 1}" for j in range(AMBIENT_DIM)],
    )
    return features, params


def generate_toy_city(n_lsoa=40, oas_per_lsoa=5, n_features=30, seed=0):
    """A small fake city for exercising the full pipeline.

    Each LSOA gets a latent deprivation level shared (with jitter) by its OAs;
    OA features are noisy nonlinear functions of that level plus a second,
    unrelated latent factor. IMD and the four "strong" domains track the
    deprivation latent closely, the three "weak" ones only loosely.

    Returns ``(features, hierarchy, deprivation, boundaries)`` where
    ``boundaries`` is a GeoJSON FeatureCollection of unit squares keyed by
    LSOA code under ``area_code``.
    """
    from .aggregation import AreaHierarchy
    from .evaluation import DOMAINS, DeprivationTable, STRONG_DOMAINS

    rng = np.random.default_rng(seed)
    lsoas = [f"L{i:04d}" for i in range(n_lsoa)]
    deprivation = rng.standard_normal(n_lsoa)
    oas, parents, oa_latent = [], [], []
    for i, lsoa in enumerate(lsoas):
        for j in range(oas_per_lsoa):
            oas.append(f"{lsoa}O{j}")
            parents.append(lsoa)
            oa_latent.append(deprivation[i] + 0.3 * rng.standard_normal())
    oa_latent = np.array(oa_latent)
    other = rng.standard_normal(len(oas))
    mix = rng.standard_normal((2, n_features))
    raw = np.column_stack([oa_latent, other]) @ mix
    raw = np.tanh(0.7 * raw) + 0.05 * rng.standard_normal(raw.shape)
    features = FeatureMatrix(area_ids=oas, values=raw,
                             column_names=[f"var{j + 1}" for j in range(n_features)])
    hierarchy = AreaHierarchy.from_pairs(zip(oas, parents))

    domain_scores = {}
    for d in DOMAINS:
        spread = 0.3 if d in STRONG_DOMAINS else 1.5
        domain_scores[d] = deprivation + spread * rng.standard_normal(n_lsoa)
    imd = 20 + 10 * deprivation + 2 * rng.standard_normal(n_lsoa)

    def ranks(v):
        # rank 1 = most deprived
        order = np.argsort(-v, kind="stable")
        r = np.empty(len(v), dtype=np.int64)
        r[order] = np.arange(1, len(v) + 1)
        return r

    table = DeprivationTable(
        lsoa_ids=lsoas,
        imd_score=imd,
        domain_scores=domain_scores,
        domain_ranks={d: ranks(v) for d, v in domain_scores.items()},
        imd_rank=ranks(imd),
    )
    side = int(np.ceil(np.sqrt(n_lsoa)))
    feats = []
    for i, code in enumerate(lsoas):
        x, y = i % side, i // side
        ring = [[x, y], [x + 1, y], [x + 1, y + 1], [x, y + 1], [x, y]]
        feats.append({"type": "Feature", "properties": {"area_code": code},
                      "geometry": {"type": "Polygon", "coordinates": [ring]}})
    boundaries = {"type": "FeatureCollection", "features": feats}
    return features, hierarchy, table, boundaries
