import json

import numpy as np
import pytest

from sceneground.builtins import compute_builtin
from sceneground.cli import main
from sceneground.minibench import generate_mini_benchmark
from sceneground.scene import precompute_geometry, save_scene

from helpers import random_scene

CHAIR_EXPR = ('{"category":"chair","relations":'
              '[{"relation_name":"near","objects":[{"category":"table"}]}]}')


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("dataset")
    generate_mini_benchmark(root, seed=7)
    return root


def test_parse_offline_expr(tmp_path, capsys):
    src = tmp_path / "raw.json"
    src.write_text(CHAIR_EXPR, encoding="utf-8")
    out = tmp_path / "canonical.json"
    assert main(["parse", "--offline-expr", str(src), "--out", str(out)]) == 0
    parsed = json.loads(out.read_text())
    assert parsed["category"] == "chair"
    assert parsed["relations"][0]["anchors"][0]["category"] == "table"
    assert parsed["relations"][0]["negative"] is False


def test_parse_unknown_relation_exits_2(tmp_path, capsys):
    src = tmp_path / "raw.json"
    src.write_text('{"category":"bed","relations":[{"relation_name":"hovering"}]}',
                   encoding="utf-8")
    assert main(["parse", "--offline-expr", str(src)]) == 2
    assert "hovering" in capsys.readouterr().err


def test_parse_jsonl_batch(tmp_path):
    src = tmp_path / "batch.jsonl"
    src.write_text("\n".join([CHAIR_EXPR] * 10), encoding="utf-8")
    out = tmp_path / "canonical.jsonl"
    assert main(["parse", "--in", str(src), "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 10
    assert all(json.loads(line)["category"] == "chair" for line in lines)


def test_ground_argmax_and_determinism(dataset, tmp_path):
    expr = tmp_path / "expr.json"
    expr.write_text(CHAIR_EXPR, encoding="utf-8")
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    scene_path = dataset / "scenes" / "mini_prox.json"
    assert main(["ground", "--scene", str(scene_path), "--expr", str(expr),
                 "--out", str(out_a)]) == 0
    assert main(["ground", "--scene", str(scene_path), "--expr", str(expr),
                 "--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    result = json.loads(out_a.read_text())
    assert result["argmax"] == 10  # the chair beside the table
    assert result["scores"][0]["id"] == 10


def test_ground_top_k_one(dataset, tmp_path):
    expr = tmp_path / "expr.json"
    expr.write_text(CHAIR_EXPR, encoding="utf-8")
    out = tmp_path / "r.json"
    assert main(["ground", "--scene", str(dataset / "scenes" / "mini_prox.json"),
                 "--expr", str(expr), "--top-k", "1", "--out", str(out)]) == 0
    result = json.loads(out.read_text())
    assert result["candidates"] == [result["argmax"]]


def test_ground_missing_scene_is_validation_error(tmp_path, capsys):
    expr = tmp_path / "expr.json"
    expr.write_text(CHAIR_EXPR, encoding="utf-8")
    assert main(["ground", "--scene", str(tmp_path / "nope.json"),
                 "--expr", str(expr)]) == 2


def make_near_suite_files(tmp_path, rng):
    scenes_dir = tmp_path / "scenes"
    scenes_dir.mkdir(exist_ok=True)
    scene = random_scene(rng, 8, "sc0")
    save_scene(scene, scenes_dir / "sc0.json")
    geom = precompute_geometry(scene)
    data = compute_builtin("near", scene, geom).data
    cases = []
    for _ in range(400):
        t, d, a = (int(v) for v in rng.integers(0, 8, 3))
        if len({t, d, a}) < 3:
            continue
        if data[t, a] > 1.3 * data[d, a] and data[d, a] > 0:
            cases.append({"scene_id": "sc0", "target": t, "distractor": d, "anchor": a})
        if len(cases) >= 20:
            break
    suite_path = tmp_path / "suite.json"
    suite_path.write_text(json.dumps({"relation": "near", "cases": cases}), encoding="utf-8")
    return suite_path, scenes_dir


def test_optimize_command_updates_registry(tmp_path, capsys):
    rng = np.random.default_rng(0)
    suite_path, scenes_dir = make_near_suite_files(tmp_path, rng)
    registry_path = tmp_path / "registry.json"
    log_path = tmp_path / "run.jsonl"
    assert main(["optimize", "--relation", "near", "--suite", str(suite_path),
                 "--scenes", str(scenes_dir), "--source", "mutate",
                 "--seed", "3", "--registry", str(registry_path),
                 "--log", str(log_path)]) == 0
    out = capsys.readouterr().out
    assert "iteration 1" in out
    registry = json.loads(registry_path.read_text())
    assert len(registry["library"]) == 1
    log_lines = log_path.read_text().strip().splitlines()
    assert 1 <= len(log_lines) <= 65
    record = json.loads(log_lines[0])
    assert set(record) == {"iteration", "index", "pass_rate", "n_failures", "definition_hash"}


def test_optimize_single_iteration(tmp_path, capsys):
    rng = np.random.default_rng(1)
    suite_path, scenes_dir = make_near_suite_files(tmp_path, rng)
    registry_path = tmp_path / "registry.json"
    assert main(["optimize", "--relation", "near", "--suite", str(suite_path),
                 "--scenes", str(scenes_dir), "--n-iter", "1",
                 "--seed", "0", "--registry", str(registry_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("iteration") == 1


def test_bench_report_self_consistent(dataset, tmp_path, capsys):
    out = tmp_path / "report.json"
    plots = tmp_path / "plots"
    assert main(["bench", "--dataset", str(dataset), "--baseline",
                 "--workers", "3", "--out", str(out), "--plots", str(plots)]) == 0
    report = json.loads(out.read_text())
    records = report["records"]
    assert report["aggregates"]["n_records"] == len(records) == 40
    recount = sum(1 for r in records if r["correct"]) / len(records)
    assert report["aggregates"]["accuracy"] == recount
    assert report["aggregates"]["random_baseline"] <= 0.30
    # record order is input order regardless of worker scheduling
    input_order = [json.loads(line)["scene_id"]
                   for line in (dataset / "expressions.jsonl").read_text().splitlines()
                   if line.strip()]
    assert [r["scene_id"] for r in records] == input_order
    manifest = json.loads((plots / "manifest.json").read_text())
    assert len(manifest["heatmaps"]) == 4 * 5
    assert len(manifest["steps"]) == 40
    for entry in manifest["heatmaps"][:3]:
        assert (plots / entry["file"]).exists()


def test_bench_missing_dataset_is_runtime_error(tmp_path):
    assert main(["bench", "--dataset", str(tmp_path / "missing")]) == 1


def test_optimize_outputs_are_byte_deterministic(tmp_path):
    rng = np.random.default_rng(2)
    suite_path, scenes_dir = make_near_suite_files(tmp_path, rng)
    outputs = []
    for tag in ("a", "b"):
        registry_path = tmp_path / f"registry_{tag}.json"
        log_path = tmp_path / f"run_{tag}.jsonl"
        assert main(["optimize", "--relation", "near", "--suite", str(suite_path),
                     "--scenes", str(scenes_dir), "--seed", "11",
                     "--registry", str(registry_path), "--log", str(log_path)]) == 0
        outputs.append((registry_path.read_bytes(), log_path.read_bytes()))
    assert outputs[0] == outputs[1]


def test_config_file_with_flag_precedence(dataset, tmp_path):
    expr = tmp_path / "expr.json"
    expr.write_text(CHAIR_EXPR, encoding="utf-8")
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "scene": str(dataset / "scenes" / "mini_prox.json"),
        "expr": str(expr),
        "top_k": 2,
        "threshold": 0.0,
    }), encoding="utf-8")
    out_config = tmp_path / "from_config.json"
    assert main(["ground", "--config", str(config), "--out", str(out_config)]) == 0
    assert len(json.loads(out_config.read_text())["candidates"]) == 2

    # an explicit flag wins over the config value
    out_flag = tmp_path / "from_flag.json"
    assert main(["ground", "--config", str(config), "--top-k", "1",
                 "--out", str(out_flag)]) == 0
    assert len(json.loads(out_flag.read_text())["candidates"]) == 1


def test_config_missing_required_field_exits_2(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text("{}", encoding="utf-8")
    assert main(["ground", "--config", str(config)]) == 2
    assert "--scene" in capsys.readouterr().err
