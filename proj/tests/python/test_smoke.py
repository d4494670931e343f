import json
import os
import subprocess

import pytest

import ebtree


@pytest.fixture(scope="module")
def data():
    return ebtree.generate(classes=3, per_class=60, separation=4.0, seed=2)


@pytest.fixture(scope="module")
def tree(data):
    dataset, predictions = data
    return ebtree.build_eb_tree(dataset, predictions).tree


def test_version():
    assert ebtree.__version__


def test_generate(data):
    dataset, predictions = data
    assert len(dataset) == 180
    assert dataset.dimension == 3
    assert len(predictions) == 180
    assert abs(sum(dataset[0].embedding) - 1.0) < 1e-12


def test_build_and_classify(data, tree):
    dataset, predictions = data
    assert 1 <= len(tree) <= len(dataset)
    label, path = ebtree.classify(tree, dataset[0].embedding)
    assert label == path.predicted_label
    assert path.steps[0].node_id == 0
    report = ebtree.fidelity(tree, dataset, predictions)
    assert 0.9 <= report.micro_f <= 1.0


def test_config_round_trip(data):
    dataset, predictions = data
    cfg = ebtree.BuildConfig()
    cfg.k = 8
    cfg.lsh.segments = 4
    cfg.distance_mode = ebtree.DistanceMode.MIN_ALL
    t = ebtree.build_eb_tree(dataset, predictions, cfg).tree
    back = ebtree.BoundaryTree.from_json(t.to_json())
    assert back.to_json() == t.to_json()
    assert back.config.k == 8


def test_margin_helpers(data):
    dataset, predictions = data
    planes = ebtree.fit_one_vs_all(dataset, predictions)
    assert sorted(p.class_id for p in planes) == ["0", "1", "2"]
    for p in planes:
        norm = sum(v * v for v in p.w) ** 0.5
        assert abs(p.margin - 2.0 / norm) < 1e-9
    ranked = ebtree.sort_by_boundary_distance(dataset, predictions, planes)
    dists = [r.boundary_distance for r in ranked]
    assert dists == sorted(dists)


def test_explain_and_dot(data, tree):
    dataset, _ = data
    e = ebtree.explain_prediction(tree, dataset[5])
    record = json.loads(e.to_json())
    assert record["query_id"] == dataset[5].id
    assert len(record["path"]) == len(e.path_points)
    dot = ebtree.export_dot(tree, e)
    assert dot.startswith("digraph ebtree {")
    assert "color=red" in dot
    seg = ebtree.boundary_projection(tree, "0", "1")
    for pair in seg.pairs:
        assert tree.node(pair.node_a).label == "0"
        assert tree.node(pair.node_b).label == "1"


def test_detection(data, tree):
    dataset, _ = data
    cohorts = ebtree.route_training_points(tree, dataset)
    assert cohorts.training_size == len(dataset)
    report = ebtree.detect_stream(tree, cohorts, dataset)
    assert len(report.verdicts) == len(dataset)
    assert all(0.0 <= v.p_value <= 1.0 for v in report.verdicts)


def test_errors():
    with pytest.raises(ebtree.DimensionError):
        ebtree.euclidean_distance([0.0, 1.0], [0.0, 1.0, 2.0])
    with pytest.raises(ebtree.EbtreeError):
        ebtree.LabeledDataset([ebtree.EmbeddedPoint("a", "A", [0.0], "")])


def test_file_round_trip(tmp_path, data, tree):
    dataset, predictions = data
    emb = tmp_path / "emb.csv"
    ebtree.save_embeddings(str(emb), dataset, predictions)
    loaded = ebtree.load_embeddings(str(emb))
    assert loaded.has_predictions
    assert list(loaded.predictions) == list(predictions)
    path = tmp_path / "tree.json"
    ebtree.save_tree(str(path), tree)
    assert ebtree.load_tree(str(path)).to_json() == tree.to_json()


@pytest.mark.skipif(not os.environ.get("EBTREE_CLI"), reason="CLI path not provided")
def test_cli_gen_build(tmp_path):
    cli = os.environ["EBTREE_CLI"]
    emb = tmp_path / "d.csv"
    out = tmp_path / "t.json"
    subprocess.run([cli, "gen", "--per-class", "30", "--out", str(emb)], check=True)
    res = subprocess.run([cli, "build", "--embeddings", str(emb), "--out", str(out)], check=True,
                         capture_output=True, text=True)
    assert res.stdout.startswith("nodes ")
    assert len(ebtree.load_tree(str(out))) >= 1
