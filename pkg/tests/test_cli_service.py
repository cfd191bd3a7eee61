import json
import subprocess
import sys

import numpy as np
import pytest
from fastapi.testclient import TestClient

from tidylearn.cli import main
from tidylearn.model import load_model, reconstruct_scene
from tidylearn.scenes import load_dataset, scene_to_json
from tidylearn.service import make_app

TINY_TRAIN = ["--preset", "real", "--epochs", "12", "--batch-users", "2",
              "--graph-dim", "5", "--seed", "4", "--quiet"]


def run_cli(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert run_cli(["gen", "--out-dir", root / "data", "--n-train", "5",
                    "--n-test", "2", "--seed", "7", "--templates", "dining"]) == 0
    assert run_cli(["train", "--dataset", root / "data" / "train.json",
                    "--out", root / "model.json", *TINY_TRAIN]) == 0
    assert run_cli(["export-latents", "--model", root / "model.json",
                    "--dataset", root / "data" / "train.json",
                    "--out", root / "latents.json"]) == 0
    return root


def test_gen_is_seed_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert run_cli(["gen", "--out-dir", tmp_path / sub, "--n-train", "4",
                        "--n-test", "2", "--seed", "9"]) == 0
    assert (tmp_path / "a" / "train.json").read_bytes() == \
           (tmp_path / "b" / "train.json").read_bytes()
    assert (tmp_path / "a" / "test.json").read_bytes() == \
           (tmp_path / "b" / "test.json").read_bytes()


def test_train_is_byte_deterministic(workspace, tmp_path):
    assert run_cli(["train", "--dataset", workspace / "data" / "train.json",
                    "--out", tmp_path / "model2.json", *TINY_TRAIN]) == 0
    assert (workspace / "model.json").read_bytes() == \
           (tmp_path / "model2.json").read_bytes()


def test_cli_exit_codes(workspace, tmp_path):
    # bad config
    assert run_cli(["train", "--dataset", workspace / "data" / "train.json",
                    "--out", tmp_path / "m.json", "--epochs", "0", "--quiet"]) == 2
    # data error: missing file
    assert run_cli(["train", "--dataset", tmp_path / "nope.json",
                    "--out", tmp_path / "m.json", "--quiet"]) == 3
    # model mismatch: unknown template at reconstruct time
    scenes = {"scenes": [scene_to_json(
        load_dataset(workspace / "data" / "test.json").users[0].scenes[0])]}
    sf = tmp_path / "scenes.json"
    sf.write_text(json.dumps(scenes))
    assert run_cli(["reconstruct", "--model", workspace / "model.json",
                    "--scenes", sf, "--template", "garage"]) == 4
    # unknown subcommand is a usage error
    assert run_cli(["transmogrify"]) == 2


def test_reconstruct_place_arrange_roundtrip(workspace, tmp_path, capsys):
    test_ds = load_dataset(workspace / "data" / "test.json")
    scene = test_ds.users[0].scenes[0]
    sf = tmp_path / "scenes.json"
    sf.write_text(json.dumps({"scenes": [scene_to_json(scene)]}))
    assert run_cli(["reconstruct", "--model", workspace / "model.json",
                    "--scenes", sf, "--template", "dining",
                    "--out", tmp_path / "rec.json"]) == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert out["command"] == "reconstruct"
    assert len(out["positions"]) == len(scene)

    masked = scene_to_json(scene)
    masked["placed"][2] = False
    sf.write_text(json.dumps({"scenes": [masked]}))
    assert run_cli(["place", "--model", workspace / "model.json",
                    "--scenes", sf, "--mask-index", "2"]) == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert out["object"] == scene.objects[2].name
    assert len(out["position"]) == 2


def test_cli_runs_as_module(workspace, tmp_path):
    # console entry parity: python -m tidylearn.cli
    scenes = {"scenes": [scene_to_json(
        load_dataset(workspace / "data" / "test.json").users[0].scenes[0])]}
    sf = tmp_path / "scenes.json"
    sf.write_text(json.dumps(scenes))
    proc = subprocess.run(
        [sys.executable, "-m", "tidylearn.cli", "reconstruct",
         "--model", str(workspace / "model.json"), "--scenes", str(sf),
         "--template", "dining"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(proc.stdout.strip().splitlines()[-1])
    assert payload["template"] == "dining"


def test_eval_reconstruct_copy_oracle_is_exact(tmp_path, capsys):
    # noise-free users: copying the user's own example reconstructs exactly
    assert run_cli(["eval", "--task", "reconstruct",
                    "--methods", "positive_example,mean_position",
                    "--n-train", "6", "--n-test", "2",
                    "--mix", json.dumps({"noise_sigma": {"dining": 0.0}}),
                    "--out", tmp_path / "report.json"]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["methods"]["positive_example"]["mean"] == 0.0
    assert report["methods"]["mean_position"]["mean"] > 0.0


def test_latents_export_has_labels(workspace):
    payload = json.loads((workspace / "latents.json").read_text())
    assert payload["kind"] == "latents"
    assert len(payload["users"]) == 5
    assert all("mu" in row and "handedness" in row for row in payload["users"])


# -- service -------------------------------------------------------------------


@pytest.fixture(scope="module")
def client(workspace):
    model = load_model(workspace / "model.json")
    latents = json.loads((workspace / "latents.json").read_text())
    dataset = load_dataset(workspace / "data" / "train.json")
    app = make_app(model, latents=latents, train_dataset=dataset)
    return TestClient(app), model, load_dataset(workspace / "data" / "test.json")


def test_templates_endpoint(client):
    tc, model, _ = client
    res = tc.get("/templates")
    assert res.status_code == 200
    entries = {t["id"]: t for t in res.json()["templates"]}
    assert "dining" in entries
    assert len(entries["dining"]["objects"]) == 6
    assert entries["dining"]["extent"] is not None


def test_infer_predict_parity_with_library(client):
    tc, model, test_ds = client
    scene = test_ds.users[0].scenes[0]
    body = {"scenes": [scene_to_json(scene)]}
    res = tc.post("/infer", json=body)
    assert res.status_code == 200
    mu = res.json()["user_mu"]
    res2 = tc.post("/predict", json={"user_mu": mu, "template": "dining"})
    assert res2.status_code == 200
    http_positions = np.asarray(res2.json()["positions"])
    lib_positions = reconstruct_scene(model, [scene], "dining")
    np.testing.assert_allclose(http_positions, lib_positions, atol=1e-9)


def test_infer_is_stateless(client):
    tc, _, test_ds = client
    body = {"scenes": [scene_to_json(test_ds.users[0].scenes[0])]}
    a = tc.post("/infer", json=body).json()
    b = tc.post("/infer", json=body).json()
    assert a == b


def test_predict_unknown_template_404(client):
    tc, _, _ = client
    res = tc.post("/predict", json={"user_mu": [0.0, 0.0], "template": "attic"})
    assert res.status_code == 404


def test_malformed_body_400(client):
    tc, _, _ = client
    assert tc.post("/infer", json={"scenes": []}).status_code == 400
    assert tc.post("/infer", json={"nonsense": 1}).status_code == 400
    res = tc.post("/infer", json={"scenes": [{"template": "dining",
                                              "positions": [[0.0, 0.0]]}]})
    assert res.status_code == 400  # roster size mismatch


def test_predict_mask_round_trip(client):
    tc, _, test_ds = client
    scene = test_ds.users[0].scenes[0]
    body = {"scenes": [scene_to_json(scene)]}
    mu = tc.post("/infer", json=body).json()["user_mu"]
    res = tc.post("/predict", json={"user_mu": mu, "template": "dining",
                                    "mask": [1]})
    assert res.status_code == 200
    assert res.json()["mask"] == [1]
    bad = tc.post("/predict", json={"user_mu": mu, "template": "dining",
                                    "mask": [77]})
    assert bad.status_code == 400


def test_baseline_endpoints(client):
    tc, _, test_ds = client
    scene = scene_to_json(test_ds.users[0].scenes[0])
    res = tc.post("/baseline", json={"method": "positive_example",
                                     "template": "dining", "scenes": [scene]})
    assert res.status_code == 200
    np.testing.assert_allclose(res.json()["positions"], scene["positions"])
    res2 = tc.post("/baseline", json={"method": "mean_position",
                                      "template": "dining", "scenes": [scene]})
    assert res2.status_code == 200
    assert len(res2.json()["positions"]) == 6
    res3 = tc.post("/baseline", json={"method": "teleport",
                                      "template": "dining", "scenes": [scene]})
    assert res3.status_code == 400


def test_latents_endpoint(client):
    tc, _, _ = client
    res = tc.get("/latents")
    assert res.status_code == 200
    users = res.json()["users"]
    assert len(users) == 5
    assert all(len(u["mu"]) == 2 for u in users)


def test_predict_wrong_latent_dim_409(client):
    tc, _, _ = client
    res = tc.post("/predict", json={"user_mu": [0.0, 0.0, 0.0, 0.0],
                                    "template": "dining"})
    assert res.status_code == 409
