"""CLI surface: exit codes, file round trips, subcommand wiring."""

import json
import os

import numpy as np
import pytest

from styleswap.cli import main
from styleswap.image import load_image, save_image, save_mask
from styleswap.lightnet import LightNet
from styleswap.synth import make_scene
from styleswap.transformnet import BranchSpec, TransformNet


def _write_scene(tmp_path, seed=80, shape=(96, 128)):
    scene = make_scene(np.random.default_rng(seed), shape)
    img = str(tmp_path / "scene.png")
    lmj = str(tmp_path / "scene.json")
    msk = str(tmp_path / "scene_mask.png")
    save_image(img, scene.image, bit_depth=16)
    scene.landmarks.to_json(lmj)
    save_mask(msk, scene.mask)
    return img, lmj, msk


def test_unknown_command_exits_1():
    with pytest.raises(SystemExit) as ex:
        main(["frobnicate"])
    assert ex.value.code == 1


def test_missing_required_argument_exits_1():
    with pytest.raises(SystemExit) as ex:
        main(["align"])
    assert ex.value.code == 1


def test_unknown_verify_suite_exits_1():
    with pytest.raises(SystemExit) as ex:
        main(["verify", "--suite", "nope"])
    assert ex.value.code == 1


def test_missing_input_file_returns_1(tmp_path, capsys):
    rc = main(["align", "--input", str(tmp_path / "nope.png"),
               "--landmarks", str(tmp_path / "nope.json"),
               "--out", str(tmp_path / "o.png")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_invalid_train_config_returns_1(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"resolution": 32}))
    rc = main(["train", "--config", str(cfg)])
    assert rc == 1
    assert "invalid training config" in capsys.readouterr().err


def test_toyset_writes_faces_and_scenes(tmp_path, capsys):
    out = tmp_path / "toy"
    rc = main(["toyset", "--out", str(out), "--seed", "3", "--resolution", "32",
               "--n-style", "2", "--n-content", "2", "--scenes", "1"])
    assert rc == 0
    for rel in ("style/style_000.png", "style/style_001.json",
                "content/content_001.png", "scenes/scene_000.png",
                "scenes/scene_000.json", "scenes/scene_000_mask.png"):
        assert (out / rel).exists(), rel
    assert "2 style + 2 content" in capsys.readouterr().out


def test_align_writes_output_and_transform(tmp_path, one_face64):
    img, lm = one_face64
    src = str(tmp_path / "face.png")
    save_image(src, img, bit_depth=16)
    lmj = str(tmp_path / "face.json")
    lm.to_json(lmj)
    out = str(tmp_path / "aligned.png")
    tfj = str(tmp_path / "transform.json")
    rc = main(["align", "--input", src, "--landmarks", lmj, "--out", out,
               "--resolution", "64", "--transform", tfj])
    assert rc == 0
    aligned = load_image(out)
    assert aligned.shape == (64, 64, 3)
    with open(tfj) as f:
        t = json.load(f)
    assert np.asarray(t["A"]).shape == (2, 2)
    assert np.asarray(t["t"]).shape == (2,)


def test_grow_doubles_resolution(tmp_path, capsys):
    ckpt = str(tmp_path / "net32.sstb")
    TransformNet(BranchSpec(widths=(6, 8, 10)), 32, seed=2).save(ckpt)
    out = str(tmp_path / "net64.sstb")
    rc = main(["grow", "--checkpoint", ckpt, "--out", out,
               "--width", "12", "--seed", "5"])
    assert rc == 0
    grown = TransformNet.load(out)
    assert grown.resolution == 64
    assert grown.frozen_param_count() > 0
    assert "32px -> 64px" in capsys.readouterr().out


def test_swap_cli_round_trip(tmp_path):
    model = str(tmp_path / "net32.sstb")
    TransformNet(BranchSpec(widths=(6, 8, 10)), 32, seed=2).save(model)
    img, lmj, msk = _write_scene(tmp_path)
    out = str(tmp_path / "swapped.png")
    rc = main(["swap", "--model", model, "--input", img, "--landmarks", lmj,
               "--mask", msk, "--out", out, "--bit-depth", "16"])
    assert rc == 0
    swapped = load_image(out)
    assert swapped.shape == load_image(img).shape


def test_baseline_cli_round_trip(tmp_path):
    toy = tmp_path / "toy"
    assert main(["toyset", "--out", str(toy), "--seed", "6", "--resolution",
                 "64", "--n-style", "2", "--n-content", "1"]) == 0
    img, lmj, msk = _write_scene(tmp_path, seed=81)
    out = str(tmp_path / "base.png")
    rc = main(["baseline", "--styledir", str(toy / "style"), "--input", img,
               "--landmarks", lmj, "--mask", msk, "--out", out,
               "--resolution", "64"])
    assert rc == 0
    assert os.path.exists(out)


def test_lightnet_gen_and_train(tmp_path, capsys):
    data = str(tmp_path / "relight")
    rc = main(["lightnet-gen", "--out", data, "--seed", "7",
               "--resolution", "16", "--identities", "4", "--lights", "3",
               "--holdout", "2"])
    assert rc == 0
    with open(os.path.join(data, "manifest.json")) as f:
        manifest = json.load(f)
    assert len(manifest["files"]) == 4 * 3
    assert len(manifest["holdout_identities"]) == 2

    cfgp = tmp_path / "lncfg.json"
    cfgp.write_text(json.dumps({"channels": [4, 8], "embed_dim": 8,
                                "epochs": 2, "batch_size": 8, "pairs": 32}))
    outp = str(tmp_path / "lightnet16.sstb")
    rc = main(["lightnet-train", "--data", data, "--out", outp,
               "--config", str(cfgp)])
    assert rc == 0
    net = LightNet.load(outp)
    assert net.resolution == 16
    assert "loss" in capsys.readouterr().out


def test_lightnet_train_without_manifest_returns_1(tmp_path, capsys):
    rc = main(["lightnet-train", "--data", str(tmp_path),
               "--out", str(tmp_path / "x.sstb")])
    assert rc == 1
    assert "manifest" in capsys.readouterr().err


def test_verify_configs_suite_passes(capsys):
    rc = main(["verify", "--suite", "configs"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "1/1 checks passed" in out
