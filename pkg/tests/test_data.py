import numpy as np
import pytest

from osrpc.data import (CategoricalDataset, CsvSchema, SimulationConfig, SimulationTruth,
                        build_design_matrix, global_favored_levels, load_csv, outcome_table,
                        simulate, write_csv)
from osrpc.errors import DataParseError, InvalidParameterError, InvalidStateError
from osrpc.stats import rng_stream


def _write(path, text):
    path.write_text(text)
    return path


def test_load_csv_roundtrip(tmp_path):
    ds, _ = simulate(SimulationConfig(case="B", n_per_subpop=10, p=6), rng_stream(1, 0))
    write_csv(ds, tmp_path / "d.csv")
    back = load_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.x, ds.x)
    np.testing.assert_array_equal(back.s, ds.s)
    np.testing.assert_array_equal(back.y, ds.y)
    assert back.n_subpops == 4 and back.p == 6


def test_load_csv_labels_and_levels(tmp_path):
    p = _write(tmp_path / "a.csv", "id,subpop,outcome,a,b\n1,10,1,1,2\n2,2,3,2,1\n3,10,2,1,1\n")
    ds = load_csv(p, CsvSchema(levels={"a": 4}))
    assert ds.subpop_labels == ("2", "10")
    np.testing.assert_array_equal(ds.s, [2, 1, 2])
    np.testing.assert_array_equal(ds.d, [4, 2])
    assert ds.n_outcomes == 3


@pytest.mark.parametrize("body,row,col", [
    ("1,1,1,1,\n", 2, "b"),
    ("1,1,1,x,2\n", 2, "a"),
    ("1,1,1,1,2\n2,1,0,1,1\n", 3, "outcome"),
    ("1,,1,1,2\n", 2, "subpop"),
    ("1,1,1,0,2\n", 2, "a"),
])
def test_load_csv_errors_name_location(tmp_path, body, row, col):
    p = _write(tmp_path / "bad.csv", "id,subpop,outcome,a,b\n" + body)
    with pytest.raises(DataParseError) as exc:
        load_csv(p)
    assert exc.value.row == row and exc.value.column == col
    assert f"row {row}" in str(exc.value)


def test_load_csv_unknown_subpop_and_missing_column(tmp_path):
    p = _write(tmp_path / "c.csv", "id,subpop,outcome,a\n1,7,1,1\n")
    with pytest.raises(DataParseError):
        load_csv(p, CsvSchema(subpop_labels=["1", "2"]))
    p = _write(tmp_path / "e.csv", "id,group,outcome,a\n1,1,1,1\n")
    with pytest.raises(DataParseError):
        load_csv(p)
    p = _write(tmp_path / "f.csv", "id,subpop,outcome,a\n1,1,4,1\n")
    with pytest.raises(DataParseError):
        load_csv(p, CsvSchema(n_outcomes=3))


def test_dataset_validation():
    with pytest.raises(InvalidParameterError):
        CategoricalDataset(x=np.array([[3]]), d=np.array([2]), s=np.array([1]), y=np.array([1]))
    with pytest.raises(InvalidParameterError):
        CategoricalDataset(x=np.array([[1], [1]]), d=np.array([2]), s=np.array([1, 1]),
                           y=np.array([1, 1]), n_subpops=2)


def test_design_matrix_cell_means():
    ds = CategoricalDataset(x=np.ones((4, 1), int), d=np.array([2]), s=np.array([1, 2, 2, 1]),
                            y=np.array([1, 2, 3, 1]), n_subpops=2, n_outcomes=3)
    dm = build_design_matrix(ds, np.array([0, 0, 2, 1]), 3)
    assert dm.q == 5
    np.testing.assert_array_equal(dm.W, [[1, 0, 1, 0, 0], [0, 1, 1, 0, 0],
                                         [0, 1, 0, 0, 1], [1, 0, 0, 1, 0]])
    np.testing.assert_array_equal(dm.W.sum(axis=1), 2)
    with pytest.raises(InvalidStateError):
        build_design_matrix(ds, np.array([0, 0, 3, 1]), 3)
    with pytest.raises(InvalidStateError):
        build_design_matrix(ds, np.zeros(4, int), 0)


def test_global_favored_levels_layout():
    fav = global_favored_levels(50, 4)
    assert fav.shape == (3, 50)
    assert np.all(fav >= 1) and np.all(fav <= 4)
    # three distinct patterns
    assert len({tuple(r) for r in fav}) == 3


def test_outcome_table_ranges():
    cfg = SimulationConfig()
    tab = outcome_table(cfg)
    assert tab.shape == (3, 4, 3)
    np.testing.assert_allclose(tab.sum(axis=2), 1.0, atol=1e-12)
    np.testing.assert_allclose(tab[0, :, 2], np.linspace(0.97, 0.99, 4))
    np.testing.assert_allclose(tab[1, :, 2], np.linspace(0.14, 0.22, 4))


@pytest.mark.parametrize("case", ["A", "B"])
def test_simulate_shapes_and_truth(case, tmp_path):
    cfg = SimulationConfig(case=case, n_per_subpop=200, p=20)
    ds, truth = simulate(cfg, rng_stream(3, 1))
    assert ds.n == 800 and ds.p == 20 and ds.n_subpops == 4
    assert truth.true_nu.shape == (4, 20)
    if case == "A":
        assert np.all(truth.true_G == 1)
    else:
        assert (truth.true_G == 0).sum() == 4 * 4   # last fifth of 20 variables local everywhere
    # favored level frequency close to the favored probability on a global variable
    j = 0
    fav = np.argmax(truth.true_theta0[truth.true_C, j], axis=1) + 1
    assert abs((ds.x[:, j] == fav).mean() - 0.85) < 0.05
    truth.save(tmp_path / "t.json")
    back = SimulationTruth.load(tmp_path / "t.json")
    np.testing.assert_array_equal(back.true_C, truth.true_C)
    np.testing.assert_array_equal(back.true_G, truth.true_G)
    assert back.case == case


def test_simulate_deterministic():
    a, _ = simulate(SimulationConfig(n_per_subpop=20), rng_stream(4, 2))
    b, _ = simulate(SimulationConfig(n_per_subpop=20), rng_stream(4, 2))
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)


def test_simulation_config_validation():
    with pytest.raises(InvalidParameterError):
        SimulationConfig(case="C")
    with pytest.raises(InvalidParameterError):
        SimulationConfig(favored_prob=0.2)
