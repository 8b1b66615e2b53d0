import json

import numpy as np
import pytest

from relshift import CounterRng
from relshift.cli import main
from relshift.errors import SchemaError
from relshift.io import (
    align_samples,
    read_matrix_csv,
    read_newick_file,
    read_response_csv,
    write_matrix_csv,
    write_newick_file,
    write_response_csv,
)
from relshift.simulate import make_supp_smalltree

from conftest import random_composition


# ---------------------------------------------------------------- io round trips

def test_matrix_csv_round_trip(tmp_path):
    vals = random_composition(6, 4, seed=1)
    ids = [f"s{i}" for i in range(6)]
    cols = ["a", "b", "c", "d"]
    path = tmp_path / "m.csv"
    write_matrix_csv(path, vals, ids, cols)
    back, ids2, cols2 = read_matrix_csv(path)
    assert ids2 == ids and cols2 == cols
    assert np.array_equal(back, vals)  # %.17g preserves doubles exactly


def test_response_csv_round_trip(tmp_path):
    y = CounterRng(2).standard_normal(5)
    ids = list("abcde")
    path = tmp_path / "y.csv"
    write_response_csv(path, y, ids)
    back, ids2 = read_response_csv(path)
    assert ids2 == ids
    assert np.array_equal(back, y)


def test_missing_values_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("sample_id,a,b\ns1,0.5,\ns2,0.25,0.75\n")
    with pytest.raises(SchemaError):
        read_matrix_csv(path)


def test_newick_file_round_trip(tmp_path, fig_tree):
    path = tmp_path / "t.nwk"
    write_newick_file(path, fig_tree)
    back = read_newick_file(path)
    assert back.leaf_labels() == fig_tree.leaf_labels()
    assert back.n_nodes == fig_tree.n_nodes


def test_align_samples_mismatch_names_ids():
    with pytest.raises(SchemaError) as err:
        align_samples(["a", "b"], ["a", "c"], sources=["x.csv", "y.csv"])
    msg = str(err.value)
    assert "y.csv" in msg and "'b'" in msg and "'c'" in msg


def test_align_samples_order():
    order, (px, py) = align_samples(["b", "a", "c"], ["c", "b", "a"])
    assert order == ["a", "b", "c"]
    assert np.array_equal(px, [1, 0, 2])
    assert np.array_equal(py, [2, 1, 0])


# ---------------------------------------------------------------- cli end to end

def _write_inputs(tmp_path, seed=0, shuffle=None):
    ds = make_supp_smalltree(seed=seed)
    xtr, ytr = ds.train()
    ids = list(xtr.row_labels)
    order = np.arange(len(ids))
    if shuffle is not None:
        order = CounterRng(shuffle).permutation(len(ids))
    write_matrix_csv(tmp_path / "x.csv", xtr.values[order],
                     [ids[i] for i in order], xtr.col_labels)
    write_response_csv(tmp_path / "y.csv", ytr[order], [ids[i] for i in order])
    write_newick_file(tmp_path / "tree.nwk", ds.tree)
    return ds


def test_cli_fit_fixed_lambda(tmp_path):
    _write_inputs(tmp_path)
    out = tmp_path / "out"
    code = main(["fit", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv"),
                 "--tree", str(tmp_path / "tree.nwk"), "--penalty", "cl2",
                 "--lambda", "0.01", "--out", str(out)])
    assert code == 0
    model = json.loads((out / "model.json").read_text())
    assert model["penalty"] == "cl2"
    assert model["lambda"] == 0.01
    assert len(model["beta"]) == 6
    assert (out / "summary.txt").exists()


def test_cli_fit_auto_runs_cv(tmp_path):
    _write_inputs(tmp_path)
    out = tmp_path / "out"
    code = main(["fit", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv"),
                 "--tree", str(tmp_path / "tree.nwk"), "--penalty", "dl2",
                 "--lambda", "auto", "--n-lambda", "8", "--ratio", "0.01",
                 "--seed", "3", "--out", str(out)])
    assert code == 0
    cv = json.loads((out / "cv.json").read_text())
    assert len(cv["lambda_grid"]) == 8
    assert cv["lambda_best"] in cv["lambda_grid"]
    assert cv["k"] == 5 and cv["seed"] == 3


def test_cli_row_order_does_not_matter(tmp_path):
    d1 = tmp_path / "a"
    d2 = tmp_path / "b"
    d1.mkdir()
    d2.mkdir()
    _write_inputs(d1, seed=4)
    _write_inputs(d2, seed=4, shuffle=99)
    outs = []
    for d in (d1, d2):
        out = d / "out"
        assert main(["fit", "--x", str(d / "x.csv"), "--y", str(d / "y.csv"),
                     "--tree", str(d / "tree.nwk"), "--penalty", "l1",
                     "--lambda", "0.02", "--out", str(out)]) == 0
        outs.append((out / "model.json").read_text())
    assert outs[0] == outs[1]


def test_cli_schema_error_exit_code_and_message(tmp_path, capsys):
    _write_inputs(tmp_path)
    # corrupt a taxon label
    x = (tmp_path / "x.csv").read_text().replace("t3", "WRONG")
    (tmp_path / "x.csv").write_text(x)
    code = main(["fit", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv"),
                 "--tree", str(tmp_path / "tree.nwk"), "--penalty", "cl2",
                 "--lambda", "0.01", "--out", str(tmp_path / "out")])
    assert code == 2
    assert "WRONG" in capsys.readouterr().err


def test_cli_es_without_tree(tmp_path):
    _write_inputs(tmp_path)
    out = tmp_path / "out"
    code = main(["fit", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv"),
                 "--penalty", "es", "--lambda", "0.005", "--out", str(out)])
    assert code == 0
    model = json.loads((out / "model.json").read_text())
    assert model["gamma"] is None and model["gamma_root"] is None


def test_cli_simulate_writes_replicates(tmp_path):
    out = tmp_path / "sims"
    code = main(["simulate", "--scenario", "study2_tree", "--seed", "7",
                 "--reps", "2", "--out", str(out)])
    assert code == 0
    for rep in ("rep000", "rep001"):
        d = out / rep
        assert (d / "x_true.csv").exists()
        assert (d / "x_observed.csv").exists()
        assert (d / "y.csv").exists()
        assert (d / "tree.nwk").exists()
        truth = json.loads((d / "truth.json").read_text())
        assert len(truth["beta_star"]) == 100
    tree = read_newick_file(out / "rep000" / "tree.nwk")
    assert tree.n_leaves == 100


def test_cli_check_bounds(tmp_path):
    out = tmp_path / "bounds"
    code = main(["check-bounds", "--penalty", "cl2", "--replicates", "20",
                 "--n", "100", "--seed", "1", "--out", str(out)])
    assert code == 0
    summary = json.loads((out / "bound_summary.json").read_text())
    assert summary["replicates"] == 20
    lines = (out / "bound_replicates.csv").read_text().strip().splitlines()
    assert len(lines) == 21  # header + rows
    assert lines[0] == "replicate,lhs,rhs,ratio,satisfied"


def test_cli_missing_tree_for_tree_penalty(tmp_path, capsys):
    _write_inputs(tmp_path)
    code = main(["fit", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv"),
                 "--penalty", "dl2", "--lambda", "0.01", "--out", str(tmp_path / "out")])
    assert code == 2


def test_cli_node_weight_overrides(tmp_path):
    _write_inputs(tmp_path)
    weights = tmp_path / "w.csv"
    # overweight the deepest nodes; n9/n10 are the subtree roots
    weights.write_text("n9,2.5\nn10,0.5\nt1,3.0\n")
    out = tmp_path / "out"
    code = main(["fit", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv"),
                 "--tree", str(tmp_path / "tree.nwk"), "--penalty", "l1",
                 "--lambda", "0.01", "--weights", str(weights), "--out", str(out)])
    assert code == 0
    bad = tmp_path / "bad.csv"
    bad.write_text("not_a_node,1.0\n")
    code = main(["fit", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv"),
                 "--tree", str(tmp_path / "tree.nwk"), "--penalty", "l1",
                 "--lambda", "0.01", "--weights", str(bad), "--out", str(out)])
    assert code == 2


def test_cli_config_file(tmp_path):
    _write_inputs(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_iter": 500, "tol": 1e-6,
                               "mu_policy": {"kind": "accuracy", "value": 1e-2}}))
    out = tmp_path / "out"
    code = main(["fit", "--x", str(tmp_path / "x.csv"), "--y", str(tmp_path / "y.csv"),
                 "--tree", str(tmp_path / "tree.nwk"), "--penalty", "l1",
                 "--lambda", "0.01", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    model = json.loads((out / "model.json").read_text())
    assert model["solver"]["n_iter"] <= 500
