import numpy as np
import pytest

from unfairedge.decomposition import FitOptions
from unfairedge.experiments import (
    Table,
    _set_node_theta,
    edge_property,
    exp1,
    exp1_spec,
    exp2,
    medians_by,
    model_compare,
)
from unfairedge.synthesis import bail_graph, cpts_from_scores, shipped_score_spec

FAST = FitOptions(epochs=200)


def test_set_node_theta_keeps_marginality():
    g = bail_graph()
    spec = _set_node_theta(g, shipped_score_spec(), "J", {"R": 0.3, "G": 0.1})
    assert spec.theta[("R", "J")] == 0.3 and spec.theta[("G", "J")] == 0.1
    assert sum(spec.theta[(p, "J")] for p in g.parents("J")) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        _set_node_theta(g, spec, "J", {"R": 0.8, "G": 0.4})
    with pytest.raises(ValueError):
        _set_node_theta(g, spec, "L", {"R": 0.2, "A": 0.2})


def test_exp1_spec_switches_off_other_unfair_edges():
    g = bail_graph()
    spec = exp1_spec(g, shipped_score_spec(), 0.2, theta_re=0.1)
    assert spec.theta[("R", "J")] == 0.2 and spec.theta[("G", "J")] == 0.0
    assert spec.theta[("R", "E")] == 0.1 and spec.theta[("G", "E")] == 0.0 and spec.theta[("A", "E")] == 0.0
    assert spec.theta[("A", "L")] == 1.0
    cpts_from_scores(g, spec)


def test_exp1_table_shape():
    t = exp1(thetas_rj=(0.0, 0.5), thetas_re=(0.0,), thetas_gj=(0.1,))
    assert t.header == ("panel", "theta_other", "theta_rj", "c_upper", "abs_c", "mu_rj")
    assert [r[:3] for r in t.rows] == [("RE", 0.0, 0.0), ("RE", 0.0, 0.5), ("GJ", 0.1, 0.0), ("GJ", 0.1, 0.5)]
    zero = t.rows[0]
    assert zero[3] == pytest.approx(0.0, abs=1e-9) and zero[4] == pytest.approx(0.0, abs=1e-12)
    assert t.rows[1][4] > 0


def test_exp2_small_run():
    t = exp2(sizes=(100, 10000), reps=2, opts=FAST, nonlinear=False)
    assert len(t.rows) == 4
    assert all(np.isnan(v) for v in t.column("d_nl"))
    med = medians_by(t, "m", "d_l")
    assert set(med) == {100, 10000}
    assert min(t.column("d_l")) >= 0


def test_edge_property_small_run():
    t = edge_property(parents=("R",), thetas=(0.5,), draws=2, opts=FAST)
    assert [r[:3] for r in t.rows] == [("R->J", 0.5, 0), ("R->J", 0.5, 1)]
    for r in t.rows:
        assert 0.0 <= r[3] <= 1.0 and r[4] >= 0 and r[5] >= 0


def test_model_compare_small_run():
    t = model_compare(grid_size=2, opts=FAST)
    assert t.column("model") == [0, 1, 2, 3]
    assert all(v >= 0 for v in t.column("mse_linear") + t.column("mse_mlp"))


def test_workers_do_not_change_results():
    a = edge_property(parents=("G",), thetas=(0.2,), draws=3, seed=4, opts=FAST, jobs=1)
    b = edge_property(parents=("G",), thetas=(0.2,), draws=3, seed=4, opts=FAST, jobs=2)
    assert a.to_csv() == b.to_csv()


def test_table_csv_uses_round_trip_floats(tmp_path):
    t = Table("x", ("a", "b"), [(1, 0.1 + 0.2)])
    t.write_csv(tmp_path / "x.csv")
    assert (tmp_path / "x.csv").read_text() == "a,b\n1,0.30000000000000004\n"
    assert medians_by(Table("y", ("k", "v"), [(1, 3.0), (1, 1.0), (2, 5.0)]), "k", "v") == {1: 2.0, 2: 5.0}
