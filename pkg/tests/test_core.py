import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from binn.core import (
    CenterPlacement,
    ConfigError,
    CsvFormatError,
    Dataset,
    DatasetError,
    ModelConfig,
    Scaler,
    derive_seed,
    fit_scaler,
    load_csv,
    save_csv,
)


class TestDataset:
    def test_shapes(self):
        d = Dataset([[1.0, 2.0], [3.0, 4.0]], [5.0, 6.0])
        assert (d.n, d.dim, len(d)) == (2, 2, 2)

    def test_row_mismatch(self):
        with pytest.raises(DatasetError):
            Dataset(np.zeros((3, 2)), np.zeros(2))

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_rejects_non_finite(self, bad):
        x = np.zeros((3, 2))
        x[1, 1] = bad
        with pytest.raises(DatasetError):
            Dataset(x, np.zeros(3))
        with pytest.raises(DatasetError):
            Dataset(np.zeros((3, 2)), [0.0, bad, 0.0])

    def test_immutable(self):
        d = Dataset(np.zeros((2, 1)), np.zeros(2))
        with pytest.raises(ValueError):
            d.inputs[0, 0] = 1.0

    def test_subset_and_concat(self):
        d = Dataset(np.arange(8.0).reshape(4, 2), np.arange(4.0))
        parts = [d.subset([0, 1]), d.subset([2, 3])]
        back = Dataset.concat(parts)
        np.testing.assert_array_equal(back.inputs, d.inputs)
        np.testing.assert_array_equal(back.targets, d.targets)


class TestScaler:
    def test_affine(self):
        s = fit_scaler(np.array([[-1.0], [0.0], [1.0]]))
        assert s.lower[0] == -1.0 and s.upper[0] == 1.0
        assert s.transform([[0.0]])[0, 0] == 0.5

    def test_constant_dimension(self):
        s = fit_scaler(np.array([[2.0], [2.0], [2.0]]))
        assert s.transform([[2.0]])[0, 0] == 0.5

    def test_round_trip_examples(self):
        s = Scaler([-3.0], [5.0])
        u = np.array([[0.0], [0.25], [1.0]])
        np.testing.assert_allclose(s.transform(s.inverse(u)), u, rtol=1e-12, atol=0)

    def test_maps_into_unit_box(self, rng):
        x = rng.normal(size=(50, 3)) * [1.0, 100.0, 1e-3]
        u = fit_scaler(x).transform(x)
        assert u.min() >= 0.0 and u.max() <= 1.0
        np.testing.assert_allclose(u.min(axis=0), 0.0, atol=1e-15)
        np.testing.assert_allclose(u.max(axis=0), 1.0, atol=1e-15)

    def test_empty(self):
        with pytest.raises(DatasetError):
            fit_scaler(np.zeros((0, 2)))

    def test_bad_bounds(self):
        with pytest.raises(DatasetError):
            Scaler([1.0], [0.0])

    @settings(max_examples=200, deadline=None)
    @given(
        lo=st.floats(-1e6, 1e6),
        width=st.floats(1e-3, 1e6),
        x=st.floats(-1e7, 1e7),
    )
    def test_round_trip_property(self, lo, width, x):
        s = Scaler([lo], [lo + width])
        back = s.inverse(s.transform([[x]]))[0, 0]
        assert abs(back - x) <= 1e-12 * max(abs(x), abs(lo), abs(lo + width), 1.0) * 16


class TestModelConfig:
    def test_defaults_valid(self):
        ModelConfig().validate()

    @pytest.mark.parametrize(
        "field,value",
        [
            ("modes", 0),
            ("prior_variance", 0.0),
            ("noise_variance", -1.0),
            ("length_scales", 0.0),
            ("basis_counts", 0),
            ("sweeps", 0),
            ("jitter", -1e-3),
            ("patience", 0),
        ],
    )
    def test_invalid(self, field, value):
        with pytest.raises(ConfigError):
            ModelConfig(**{field: value}).validate()

    def test_per_dimension_broadcast(self):
        c = ModelConfig(basis_counts=(3, 4), length_scales=0.2)
        assert c.counts_for(2) == (3, 4)
        assert c.scales_for(2) == (0.2, 0.2)
        with pytest.raises(ConfigError):
            c.counts_for(3)

    def test_dict_round_trip(self):
        c = ModelConfig(modes=2, basis_counts=(3, 4), length_scales=(0.1, 0.3), seed=2**63 + 5,
                        center_placement=CenterPlacement.AT_TRAINING_POINTS, patience=30)
        assert ModelConfig.from_dict(c.to_dict()) == c

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            ModelConfig.from_dict({"bogus": 1})


class TestCsv:
    def test_schema(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("a,b,y\n1,2,3\n4,5,6\n")
        d = load_csv(p)
        assert (d.dim, d.n) == (2, 2)
        assert d.input_names == ("a", "b") and d.target_name == "y"
        np.testing.assert_array_equal(d.targets, [3.0, 6.0])

    def test_non_numeric_cell(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("a,b,y\n1,2,3\n4,abc,6\n")
        with pytest.raises(CsvFormatError) as err:
            load_csv(p)
        assert err.value.row == 3 and err.value.column == "b"
        assert "row 3" in str(err.value) and "'b'" in str(err.value)

    def test_ragged(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("a,b,y\n1,2,3\n4,5\n")
        with pytest.raises(CsvFormatError, match="row 3"):
            load_csv(p)

    def test_missing_header(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1,2,3\n4,5,6\n")
        with pytest.raises(CsvFormatError, match="header"):
            load_csv(p)

    def test_target_column_by_name(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("a,y,b\n1,2,3\n")
        d = load_csv(p, target_column="y")
        assert d.input_names == ("a", "b")
        np.testing.assert_array_equal(d.inputs, [[1.0, 3.0]])

    def test_round_trip(self, tmp_path, rng):
        x = rng.normal(size=(10, 3)) * 10.0 ** rng.integers(-8, 8, size=(10, 3))
        d = Dataset(x, rng.normal(size=10))
        save_csv(d, tmp_path / "r.csv")
        back = load_csv(tmp_path / "r.csv")
        np.testing.assert_allclose(back.inputs, d.inputs, rtol=1e-15)
        np.testing.assert_allclose(back.targets, d.targets, rtol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (4, 3), elements=st.floats(-1e300, 1e300, allow_nan=False)))
    def test_round_trip_property(self, tmp_path_factory, mat):
        p = tmp_path_factory.mktemp("csv") / "r.csv"
        save_csv(Dataset(mat[:, :2], mat[:, 2]), p)
        back = load_csv(p)
        np.testing.assert_array_equal(back.inputs, mat[:, :2])
        np.testing.assert_array_equal(back.targets, mat[:, 2])


class TestSeeds:
    def test_purposes_differ(self):
        seeds = {derive_seed(7, p) for p in ("data", "init", "al", "test")}
        assert len(seeds) == 4

    def test_deterministic(self):
        assert derive_seed(2**64 - 1, "data") == derive_seed(2**64 - 1, "data")

    def test_unknown_purpose(self):
        with pytest.raises(ValueError):
            derive_seed(0, "other")
