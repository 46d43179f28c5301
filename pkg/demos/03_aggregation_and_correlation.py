"""
OA to LSOA, two ways
====================

An LSOA-level map can come from averaging the raw OA variables and
embedding the LSOAs, or from embedding the OAs and averaging the
eigenvectors. This compares the two on the toy city and prints the
domain correlation table that a heatmap would show.
"""

import numpy as np

from censusdiffmap import aggregate_features, aggregate_vector
from censusdiffmap.evaluation import DOMAINS, correlation_matrix, orient
from censusdiffmap.pipeline import PipelineConfig, embed_features
from censusdiffmap.synthetic import generate_toy_city

features, hierarchy, table, _ = generate_toy_city(n_lsoa=60, oas_per_lsoa=5, seed=4)
config = PipelineConfig()

# (a) aggregate first, then embed 60 LSOAs
lsoa_map = embed_features(aggregate_features(features, hierarchy), config).to_frame()
# (b) embed 300 OAs, then average each eigenvector over its LSOA
oa_map = aggregate_vector(embed_features(features, config).to_frame(), hierarchy)

imd = table.series()["IMD"]
for label, frame in (("a", lsoa_map), ("b", oa_map)):
    rs = [abs(np.corrcoef(frame[c].reindex(imd.index), imd)[0, 1]) for c in frame.columns]
    print(f"map {label}: |r(IMD)| by eigenvector", " ".join(f"{r:.2f}" for r in rs))

# Which eigenvector carries deprivation is not fixed; on this city map (a)
# puts it first. Keep whichever tracks IMD best, flipped to agree with it.
def best(frame):
    col = max(frame.columns, key=lambda c: abs(np.corrcoef(frame[c].reindex(imd.index), imd)[0, 1]))
    return col, orient(frame[col].reindex(imd.index), imd)

col_a, a = best(lsoa_map)
col_b, b = best(oa_map)
print(f"r(map a {col_a}, map b {col_b}) = {np.corrcoef(a, b)[0, 1]:.3f}")

# %%
# Correlation table: IMD, the seven domains and both eigenvectors.

names, mat = correlation_matrix(table, {"map a": a, "map b": b})
width = max(len(n) for n in names)
print(" " * width, " ".join(f"{n[:6]:>6s}" for n in names))
for n, row in zip(names, mat):
    print(f"{n:>{width}s}", " ".join(f"{x:6.2f}" for x in row))

# Income, Employment, Health and Education should sit above the other three.
for label in ("map a", "map b"):
    i = names.index(label)
    by_domain = {d: mat[i, names.index(d)] for d in DOMAINS}
    print(label, "->", ", ".join(f"{d} {r:.2f}" for d, r in sorted(by_domain.items(), key=lambda kv: -kv[1])))
