import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset
from pswdisparity.config import AnalysisConfig, CovariateSpec
from pswdisparity.data import design_matrix, load_dataset, write_dataset
from pswdisparity.errors import (
    ConfigError,
    EmptyGroup,
    InvalidLevel,
    MissingColumn,
    MissingValue,
    NonBinaryGroup,
    RankDeficient,
)

BASE = {"group": "z", "outcome": "y", "covariates": {"x": {"role": "health_status"}}}


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_small_csv(tmp_path):
    p = write(tmp_path, "z,y,x\n1,2,0\n1,4,1\n0,1,0\n0,3,1\n")
    ds = load_dataset(p, BASE)
    assert ds.n_units == 4
    np.testing.assert_array_equal(ds.group, [1, 1, 0, 0])
    np.testing.assert_array_equal(ds.outcome, [2, 4, 1, 3])
    np.testing.assert_array_equal(ds.column("x"), [0, 1, 0, 1])
    assert ds.roles == {"x": "health_status"}


def test_non_binary_group_names_row(tmp_path):
    rows = ["1,1,0", "0,1,0", "1,1,0", "0,1,0", "1,1,0", "0,1,0", "2,1,0", "0,1,1"]
    p = write(tmp_path, "z,y,x\n" + "\n".join(rows) + "\n")
    with pytest.raises(NonBinaryGroup) as exc:
        load_dataset(p, BASE)
    assert exc.value.row == 7


@pytest.mark.parametrize("cell", ["", "NA", "nan"])
def test_missing_value_rejected(tmp_path, cell):
    p = write(tmp_path, f"z,y,x\n1,2,0\n0,{cell},1\n")
    with pytest.raises(MissingValue) as exc:
        load_dataset(p, BASE)
    assert (exc.value.row, exc.value.column) == (2, "y")


def test_missing_column(tmp_path):
    p = write(tmp_path, "z,x\n1,0\n0,1\n")
    with pytest.raises(MissingColumn, match="'y'"):
        load_dataset(p, BASE)


def test_empty_group(tmp_path):
    p = write(tmp_path, "z,y,x\n1,2,0\n1,3,1\n")
    with pytest.raises(EmptyGroup):
        load_dataset(p, BASE)


def test_extra_columns_ignored(tmp_path):
    p = write(tmp_path, "id,z,y,x,notes\n1,1,2,0,\n2,0,3,1,abc\n")
    assert load_dataset(p, BASE).covariate_names == ("x",)


def categorical_config():
    return {
        "group": "z", "outcome": "y",
        "covariates": {
            "age": {"role": "health_status"},
            "region": {"role": "ses", "type": "categorical",
                       "levels": ["west", "east", "south"], "reference": "west"},
        },
    }


def test_categorical_one_hot_drops_reference(tmp_path):
    p = write(tmp_path, "z,y,age,region\n1,1,30,west\n0,2,40,east\n1,3,50,south\n0,4,60,east\n")
    ds = load_dataset(p, categorical_config())
    assert ds.covariate_names == ("age", "region[east]", "region[south]")
    assert ds.sources["region"] == ("region[east]", "region[south]")
    assert ds.roles["region[south]"] == "ses"
    x = design_matrix(ds, CovariateSpec(("region",)))
    np.testing.assert_array_equal(x[:, 1:], [[0, 0], [1, 0], [0, 1], [1, 0]])
    assert np.all(x[:, 1:].sum(axis=1) <= 1)


def test_undeclared_level(tmp_path):
    p = write(tmp_path, "z,y,age,region\n1,1,30,west\n0,2,40,north\n")
    with pytest.raises(InvalidLevel) as exc:
        load_dataset(p, categorical_config())
    assert exc.value.row == 2


def test_config_schema_rejections():
    with pytest.raises(ConfigError):
        AnalysisConfig.from_dict({"group": "z", "outcome": "y", "covariates": {}})
    bad = categorical_config()
    bad["covariates"]["region"]["reference"] = "north"
    with pytest.raises(ConfigError):
        AnalysisConfig.from_dict(bad)
    bad = dict(BASE, scheme="matching")
    with pytest.raises(ConfigError):
        AnalysisConfig.from_dict(bad)
    with pytest.raises(ConfigError):
        AnalysisConfig.from_dict(dict(BASE, propensity_covariates=["nope"]))


def test_default_propensity_covariates_are_health_status():
    cfg = AnalysisConfig.from_dict(categorical_config())
    assert cfg.propensity_names() == ("age",)


def test_design_matrix_intercept_and_order():
    ds = make_dataset([1, 0], [0.0, 1.0], [[3.0], [5.0]], names=("a",))
    np.testing.assert_array_equal(design_matrix(ds, CovariateSpec(("a",))), [[1, 3], [1, 5]])


def test_design_matrix_detects_duplicate_column():
    x = np.array([[1.0, 1.0], [2.0, 2.0], [0.5, 0.5], [3.0, 3.0]])
    ds = make_dataset([1, 0, 1, 0], np.zeros(4), x, names=("a", "b"))
    with pytest.raises(RankDeficient):
        design_matrix(ds, CovariateSpec(("a", "b")))


def test_design_matrix_detects_constant_column():
    x = np.array([[1.0, 7.0], [2.0, 7.0], [0.5, 7.0], [3.0, 7.0]])
    ds = make_dataset([1, 0, 1, 0], np.zeros(4), x, names=("a", "c"))
    with pytest.raises(RankDeficient) as exc:
        design_matrix(ds, CovariateSpec(("a", "c")))
    assert exc.value.columns == ["c"]


def test_dataset_is_immutable():
    ds = make_dataset([1, 0], [1.0, 2.0], [[0.0], [1.0]])
    with pytest.raises(ValueError):
        ds.outcome[0] = 5.0


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_csv_round_trip_is_bit_exact(tmp_path_factory, data):
    n = data.draw(st.integers(2, 12))
    z = [1, 0] + data.draw(st.lists(st.integers(0, 1), min_size=n - 2, max_size=n - 2))
    y = data.draw(st.lists(finite, min_size=n, max_size=n))
    x = data.draw(st.lists(st.lists(finite, min_size=2, max_size=2), min_size=n, max_size=n))
    ds = make_dataset(z, y, x)
    path = tmp_path_factory.mktemp("rt") / "ds.csv"
    write_dataset(ds, path)
    back = load_dataset(path, ds.numeric_config())
    assert back.group.tobytes() == ds.group.tobytes()
    assert back.outcome.tobytes() == ds.outcome.tobytes()
    assert back.covariates.tobytes() == ds.covariates.tobytes()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_design_matrix_row_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    n = 20
    x = rng.standard_normal((n, 3))
    z = np.r_[1, 0, rng.integers(0, 2, n - 2)]
    ds = make_dataset(z, rng.standard_normal(n), x)
    spec = CovariateSpec(ds.covariate_names)
    perm = rng.permutation(n)
    np.testing.assert_array_equal(design_matrix(ds.take(perm), spec), design_matrix(ds, spec)[perm])


def test_config_file_round_trip(tmp_path, fixture_config):
    from pswdisparity.config import load_config

    cfg = load_config(fixture_config)
    assert cfg.data_path().exists()
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert load_config(p).config_hash() == cfg.config_hash()
