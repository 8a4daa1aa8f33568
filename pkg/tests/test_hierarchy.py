import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import confusion, knn_brute
from rffp.catalog import REFERENCE_UAS_EDGES, UAS_EDGES
from rffp.errors import InvalidInputError
from rffp.hierarchy import (KnnClassifier, LabelTree, PredictionPath, flat_metrics, hc_predict, hc_predict_many,
                            hc_train, hier_metrics, knn_fit, knn_predict, level_report, node_flat_reports,
                            parse_tree, read_tree, tree_from_paths)

SMALL = LabelTree([("R", "UAV"), ("R", "Ctrl"), ("UAV", "PhantomLike"), ("UAV", "InspireLike"),
                   ("Ctrl", "X"), ("Ctrl", "Y")])


class TestLabelTree:
    def test_structure(self):
        t = LabelTree(UAS_EDGES)
        assert t.root == "UAS"
        assert t.children("UAS") == ["Controller", "UAV"]
        assert t.path_to("ModelA-Fly") == ["UAV", "ModelA", "ModelA-Fly"]
        assert len(t.leaves()) == 6 and t.depth() == 3

    @pytest.mark.parametrize("edges", [
        [("a", "b"), ("c", "b")],          # two parents
        [("a", "b"), ("b", "a")],          # cycle, no root
        [("a", "b"), ("c", "d")],          # two roots
        [("a", "a")],
    ])
    def test_rejects_non_trees(self, edges):
        with pytest.raises(InvalidInputError):
            LabelTree(edges)

    def test_file_round_trip(self, tmp_path):
        t = LabelTree(REFERENCE_UAS_EDGES)
        p = tmp_path / "t.tree"
        p.write_text("# comment\n\n" + t.to_text())
        assert read_tree(p) == t

    def test_bad_line(self):
        with pytest.raises(InvalidInputError, match="line 1"):
            parse_tree("a b c\n")

    def test_normalize_path(self):
        assert SMALL.normalize_path(["R", "UAV", "PhantomLike"]) == ("UAV", "PhantomLike")
        assert SMALL.normalize_path(["UAV"]) == ("UAV",)
        with pytest.raises(InvalidInputError):
            SMALL.normalize_path(["UAV", "X"])

    def test_tree_from_paths(self):
        t = tree_from_paths([("R", "A", "a1"), ("R", "A", "a2"), ("R", "B")])
        assert t.root == "R" and t.leaves() == ["a1", "a2", "B"]


class TestKnn:
    def test_self_prediction_k1(self, rng):
        X = rng.normal(size=(30, 4))
        y = [f"c{i % 3}" for i in range(30)]
        m = knn_fit(X, y, 1)
        assert all(knn_predict(m, X[i]) == (y[i], 1.0) for i in range(30))

    def test_matches_brute_force(self, rng):
        X = rng.integers(0, 4, size=(60, 2)).astype(float)  # ties abound
        y = [f"c{v}" for v in rng.integers(0, 3, 60)]
        m = knn_fit(X, y, 5)
        for q in rng.integers(0, 4, size=(100, 2)).astype(float) + rng.normal(0, 0.3, (100, 2)) * (rng.random((100, 1)) < 0.5):
            assert knn_predict(m, q) == knn_brute(X.tolist(), y, q.tolist(), 5)

    def test_vote_fraction(self):
        X = np.array([[0.0], [0.1], [0.2], [5.0]])
        m = knn_fit(X, ["A", "A", "B", "B"], 3)
        assert knn_predict(m, np.array([0.05])) == ("A", pytest.approx(2 / 3))

    def test_vote_tie_smaller_aggregate_distance(self):
        X = np.array([[1.0], [-1.5], [2.0], [-2.5]])
        m = knn_fit(X, ["A", "B", "A", "B"], 4)
        assert knn_predict(m, np.array([0.0]))[0] == "A"

    def test_equidistant_lower_index_wins(self):
        m = knn_fit(np.array([[1.0], [-1.0]]), ["right", "left"], 1)
        assert knn_predict(m, np.array([0.0])) == ("right", 1.0)
        m = knn_fit(np.array([[-1.0], [1.0]]), ["left", "right"], 1)
        assert knn_predict(m, np.array([0.0])) == ("left", 1.0)

    def test_confidence_bounds(self, rng):
        X = rng.normal(size=(50, 3))
        y = [str(v) for v in rng.integers(0, 4, 50)]
        m = knn_fit(X, y, 7)
        for q in rng.normal(size=(40, 3)):
            label, conf = knn_predict(m, q)
            idx = np.argsort(np.linalg.norm(X - q, axis=1), kind="stable")[:7]
            assert 1 / len({y[i] for i in idx}) <= conf <= 1

    def test_errors(self, rng):
        with pytest.raises(InvalidInputError):
            knn_fit(rng.normal(size=(3, 2)), ["a", "b"], 1)
        with pytest.raises(InvalidInputError):
            knn_fit(rng.normal(size=(3, 2)), ["a", "b", "c"], 5)
        m = knn_fit(rng.normal(size=(3, 2)), ["a", "b", "c"], 1)
        with pytest.raises(InvalidInputError):
            knn_predict(m, np.zeros(3))


def _tree_data(tree, per_leaf, rng, spread=0.2):
    X, paths = [], []
    for li, leaf in enumerate(tree.leaves()):
        centre = np.zeros(len(tree.leaves()))
        centre[li] = 3.0
        for _ in range(per_leaf):
            X.append(centre + rng.normal(0, spread, centre.size))
            paths.append((tree.root,) + tuple(tree.path_to(leaf)))
    return np.array(X), paths


class TestCascade:
    def test_reference_tree_has_six_classifiers(self, rng):
        tree = LabelTree(REFERENCE_UAS_EDGES)
        X, paths = _tree_data(tree, 6, rng)
        cascade = hc_train(tree, X, paths)
        assert len(cascade.node_classifiers) == 6
        assert set(cascade.node_classifiers) == set(tree.multi_child_parents())

    def test_single_child_pass_through(self, rng):
        tree = LabelTree([("R", "A"), ("R", "B"), ("A", "A1"), ("B", "B1"), ("B", "B2")])
        X, paths = _tree_data(tree, 5, rng)
        c = hc_train(tree, X, paths)
        assert set(c.node_classifiers) == {"R", "B"}
        p = hc_predict(c, X[0])
        assert p.labels == ("A", "A1") and p.confidences[1] == 1.0

    def test_train_counts_match_partition(self, rng):
        tree = LabelTree(UAS_EDGES)
        X, paths = _tree_data(tree, 7, rng)
        c = hc_train(tree, X, paths)
        for node in tree.multi_child_parents():
            expected = sum(1 for p in paths if node in p[1:] or (node == tree.root))
            assert c.train_counts[node] == expected

    def test_bad_path_named(self, rng):
        with pytest.raises(InvalidInputError, match="CtrlA"):
            hc_train(LabelTree(UAS_EDGES), rng.normal(size=(1, 3)), [("UAS", "UAV", "CtrlA")])

    def test_confidence_floor(self, rng):
        tree = LabelTree(UAS_EDGES)
        X, paths = _tree_data(tree, 6, rng, spread=2.0)
        c = hc_train(tree, X, paths)
        for p in hc_predict_many(c, X, confidence_floor=0.0):
            assert tree.is_leaf(p.labels[-1])
        assert all(p.labels == () for p in hc_predict_many(c, X, confidence_floor=1.01))
        for p in hc_predict_many(c, X, confidence_floor=0.7):
            assert all(conf >= 0.7 for conf in p.confidences)

    def test_single_level_reduces_to_flat(self, rng):
        tree = LabelTree([("R", "a"), ("R", "b"), ("R", "c")])
        X = rng.normal(size=(40, 2))
        labels = [("R", "abc"[v]) for v in rng.integers(0, 3, 40)]
        c = hc_train(tree, X, labels)
        flat = KnnClassifier(5).fit(X, [p[1] for p in labels])
        for q in rng.normal(size=(30, 2)):
            lab, conf = flat.predict(q)
            assert hc_predict(c, q) == PredictionPath((lab,), (conf,))

    def test_dimension_mismatch(self, rng):
        tree = LabelTree(UAS_EDGES)
        X, paths = _tree_data(tree, 5, rng)
        c = hc_train(tree, X, paths)
        with pytest.raises(InvalidInputError):
            hc_predict(c, np.zeros(3))


class TestFlatMetrics:
    def test_counts_example(self):
        pred = ["P"] * 8 + ["P"] * 2 + ["N"] * 2 + ["N"] * 8
        true = ["P"] * 8 + ["N"] * 2 + ["P"] * 2 + ["N"] * 8
        m = flat_metrics(pred, true)["per_class"]["P"]
        assert (m["tp"], m["fp"], m["fn"], m["tn"]) == (8, 2, 2, 8)
        for key in ("precision", "recall", "f1", "accuracy"):
            assert m[key] == pytest.approx(0.8)

    def test_perfect(self):
        m = flat_metrics(list("abcab"), list("abcab"))
        assert m["accuracy"] == 1 and all(v == 1 for v in m["macro"].values())

    def test_zero_denominator_flagged(self):
        m = flat_metrics(["a", "a"], ["a", "b"])
        assert m["per_class"]["b"]["precision"] == 0 and "b.precision" in m["flags"]

    def test_matches_confusion_oracle(self, rng):
        classes = list("wxyz")
        pred = [classes[i] for i in rng.integers(0, 4, 1000)]
        true = [classes[i] for i in rng.integers(0, 4, 1000)]
        m = flat_metrics(pred, true)
        for c in classes:
            tp, fp, fn, tn = confusion(pred, true, c)
            pc = m["per_class"][c]
            assert (pc["tp"], pc["fp"], pc["fn"], pc["tn"]) == (tp, fp, fn, tn)
            assert pc["precision"] == tp / (tp + fp) and pc["recall"] == tp / (tp + fn)
        assert m["macro"]["f1"] == pytest.approx(np.mean([m["per_class"][c]["f1"] for c in classes]))

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            flat_metrics(["a"], ["a", "b"])


class TestHierMetrics:
    def test_sibling_error(self):
        m = hier_metrics([("UAV", "InspireLike")], [("UAV", "PhantomLike")], SMALL)
        assert (m["hP"], m["hR"], m["hF"]) == (0.5, 0.5, 0.5)

    def test_perfect(self):
        paths = [("UAV", "PhantomLike"), ("Ctrl", "X")]
        m = hier_metrics(paths, paths, SMALL)
        assert (m["hP"], m["hR"], m["hF"]) == (1, 1, 1)

    def test_early_stop(self):
        m = hier_metrics([("UAV",)], [("UAV", "PhantomLike")], SMALL)
        assert m["hP"] == 1 and m["hR"] == 0.5 and m["hF"] == pytest.approx(2 / 3)

    def test_empty_prediction(self):
        m = hier_metrics([(), ("UAV", "PhantomLike")], [("Ctrl", "X"), ("UAV", "PhantomLike")], SMALL)
        assert m["empty_predictions"] == 1 and m["hP"] == 1 and m["hR"] == 0.5
        m = hier_metrics([()], [("Ctrl", "X")], SMALL)
        assert m["hP"] == 0 and "hP" in m["flags"]

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            hier_metrics([("UAV", "X")], [("UAV", "PhantomLike")], SMALL)
        with pytest.raises(InvalidInputError):
            hier_metrics([("UAV",)], [("UAV",)], SMALL, beta=0)

    all_paths = [()] + [tuple(SMALL.path_to(n)) for n in SMALL.nodes if n != SMALL.root]

    @given(st.lists(st.tuples(st.sampled_from(all_paths), st.sampled_from(all_paths[1:])), min_size=1, max_size=12))
    def test_bounds(self, pairs):
        m = hier_metrics([p for p, _ in pairs], [t for _, t in pairs], SMALL)
        assert 0 <= m["hP"] <= 1 and 0 <= m["hR"] <= 1
        if m["hP"] + m["hR"] > 0:
            assert min(m["hP"], m["hR"]) - 1e-12 <= m["hF"] <= max(m["hP"], m["hR"]) + 1e-12

    @given(st.lists(st.sampled_from([tuple(SMALL.path_to(l)) for l in SMALL.leaves()]), min_size=1, max_size=8))
    def test_deepening_and_truncation(self, truths):
        shallow = [t[:1] for t in truths]
        assert hier_metrics(truths, truths, SMALL)["hR"] >= hier_metrics(shallow, truths, SMALL)["hR"]
        wrong = [(t[0], next(c for c in SMALL.children(t[0]) if c != t[1])) for t in truths]
        assert hier_metrics(shallow, truths, SMALL)["hP"] >= hier_metrics(wrong, truths, SMALL)["hP"]


def test_level_report_and_node_reports(rng):
    tree = LabelTree(UAS_EDGES)
    X, paths = _tree_data(tree, 8, rng, spread=1.2)
    c = hc_train(tree, X, paths)
    preds = hc_predict_many(c, X)
    levels = level_report(preds, paths, tree)
    assert [l["level"] for l in levels] == [1, 2, 3]
    assert levels[0]["n"] == len(paths) and levels[2]["n"] == 4 * 8
    nodes = node_flat_reports(c, X, paths)
    assert set(nodes) == set(tree.multi_child_parents())
    assert nodes["UAS"]["n"] == len(paths)
