import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from censusdiffmap.aggregation import AreaHierarchy, aggregate_features, aggregate_vector
from censusdiffmap.errors import ConflictingMapping, EmptyLSOA, UnmappedArea
from censusdiffmap.graph import FeatureMatrix, standardize


def series(values, ids):
    return pd.Series(values, index=pd.Index(ids, name="area_code"), name="ev2")


@pytest.fixture
def small():
    return AreaHierarchy.from_pairs([("O1", "L1"), ("O2", "L1"), ("O3", "L2")])


def test_two_point_mean(small):
    out = aggregate_vector(series([0.1, 0.3, 5.0], ["O1", "O2", "O3"]), small)
    assert out["L1"] == pytest.approx(0.2, abs=1e-15)
    assert out["L2"] == 5.0
    assert list(out.index) == ["L1", "L2"]
    assert out.name == "ev2"


def test_constant_vector(small):
    out = aggregate_vector(series([0.7] * 3, ["O1", "O2", "O3"]), small)
    np.testing.assert_allclose(out, 0.7, atol=1e-15)


def test_order_of_input_irrelevant(small):
    a = aggregate_vector(series([1.0, 2.0, 3.0], ["O1", "O2", "O3"]), small)
    b = aggregate_vector(series([3.0, 2.0, 1.0], ["O3", "O2", "O1"]), small)
    pd.testing.assert_series_equal(a, b)


def test_unmapped(small):
    with pytest.raises(UnmappedArea) as info:
        aggregate_vector(series([1.0, 2.0], ["O1", "O9"]), small)
    assert info.value.codes == ["O9"]


def test_missing_members_warn_then_empty(small):
    with pytest.warns(UserWarning):
        out = aggregate_vector(series([1.0, 3.0], ["O1", "O3"]), small)
    assert out["L1"] == 1.0
    with pytest.raises(EmptyLSOA), pytest.warns(UserWarning):
        aggregate_vector(series([1.0, 2.0], ["O1", "O2"]), small)


def test_frame_columnwise(small):
    frame = pd.DataFrame({"ev1": [1.0, 3.0, 0.0], "ev2": [2.0, 4.0, 1.0]},
                         index=pd.Index(["O1", "O2", "O3"], name="area_code"))
    out = aggregate_vector(frame, small)
    np.testing.assert_array_equal(out.to_numpy(), [[2.0, 3.0], [0.0, 1.0]])


def test_aggregate_features_rows(small):
    fm = FeatureMatrix(["O1", "O2", "O3"], [[1, 2], [3, 4], [9, 9]], ["a", "b"])
    out = aggregate_features(fm, small)
    assert out.area_ids == ("L1", "L2")
    np.testing.assert_array_equal(out.values, [[2, 3], [9, 9]])
    assert out.column_names == ("a", "b")
    assert not out.standardized


def test_aggregate_features_identity():
    rng = np.random.default_rng(0)
    ids = [f"O{i}" for i in range(12)]
    fm = FeatureMatrix(ids, rng.standard_normal((12, 3)), ["a", "b", "c"])
    out = aggregate_features(fm, AreaHierarchy.identity(ids))
    assert np.array_equal(out.values, fm.values)
    assert out.area_ids == fm.area_ids


def test_aggregate_features_refuses_standardized(small):
    fm = FeatureMatrix(["O1", "O2", "O3"], [[1.0], [2.0], [4.0]], ["a"])
    with pytest.raises(ValueError):
        aggregate_features(standardize(fm), small)


def test_full_city_shapes():
    # 3490 OAs over 667 LSOAs, 1450 variables
    rng = np.random.default_rng(1)
    n_oa, n_lsoa, n_var = 3490, 667, 1450
    parents = np.concatenate([np.arange(n_lsoa), rng.integers(0, n_lsoa, n_oa - n_lsoa)])
    oas = [f"E00{i:06d}" for i in range(n_oa)]
    h = AreaHierarchy.from_pairs((oa, f"E01{p:06d}") for oa, p in zip(oas, parents))
    fm = FeatureMatrix(oas, rng.random((n_oa, n_var)), [f"v{j}" for j in range(n_var)])
    out = aggregate_features(fm, h)
    assert out.shape == (667, 1450)


def test_hierarchy_rules():
    with pytest.raises(ConflictingMapping):
        AreaHierarchy.from_pairs([("O1", "L1"), ("O1", "L2")])
    h = AreaHierarchy.from_pairs([("O1", "L1"), ("O1", "L1")])
    assert h.n_oas == 1 and h.n_lsoas == 1
    with pytest.raises(EmptyLSOA):
        AreaHierarchy({"O1": "L1"}, ("L1", "L2"))


hierarchies = st.lists(st.integers(0, 7), min_size=1, max_size=40).map(
    lambda parents: AreaHierarchy.from_pairs((f"O{i}", f"L{p}") for i, p in enumerate(parents)))


@settings(max_examples=60, deadline=None)
@given(hierarchies, st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_properties(h, seed, a, b):
    rng = np.random.default_rng(seed)
    oas = list(h.oa_to_lsoa)
    v = series(rng.standard_normal(len(oas)), oas)
    out = aggregate_vector(v, h)
    assert len(out) == h.n_lsoas
    for lsoa in h.lsoa_ids:
        members = v[h.members(lsoa)]
        assert out[lsoa] == pytest.approx(members.mean(), abs=1e-12)
        assert members.min() - 1e-12 <= out[lsoa] <= members.max() + 1e-12
    affine = aggregate_vector(a * v + b, h)
    np.testing.assert_allclose(affine, a * out + b, atol=1e-12)
    # aggregating the LSOA vector again under its identity hierarchy changes nothing
    again = aggregate_vector(out, h.lsoa_identity())
    np.testing.assert_array_equal(again.to_numpy(), out.to_numpy())
