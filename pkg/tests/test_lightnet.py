import numpy as np
import pytest
import torch

from styleswap.lightnet import (LightNet, LightNetConfig, LightTrainConfig,
                                LightingPair, contrastive_loss, train_lightnet)
from styleswap.synth import lighting_pairs, make_relight_dataset


def test_embedding_shape_and_determinism():
    cfg = LightNetConfig(resolution=32, channels=(4, 8), embed_dim=8, seed=2)
    a, b = LightNet(cfg), LightNet(cfg)
    lum = np.random.default_rng(0).uniform(size=(32, 32))
    ea, eb = a.embed(lum), b.embed(lum)
    assert ea.shape == (8,)
    assert np.array_equal(ea, eb)


def test_zero_image_maps_to_zero_embedding():
    # zero biases everywhere make the all-black image a fixed point
    net = LightNet(LightNetConfig(resolution=16, channels=(4,), embed_dim=8, seed=0))
    assert np.abs(net.embed(np.zeros((16, 16)))).max() == 0.0


def test_config_validation():
    with pytest.raises(ValueError):
        LightNetConfig(resolution=30, channels=(4, 8), embed_dim=8)
    with pytest.raises(ValueError):
        LightNetConfig(resolution=32, channels=(4, 8), embed_dim=4)
    with pytest.raises(ValueError):
        LightNetConfig(resolution=32, channels=(4, 8), embed_dim=8, kernel=4)


def test_forward_rejects_wrong_resolution():
    net = LightNet(LightNetConfig(resolution=32, channels=(4,), embed_dim=8))
    with pytest.raises(ValueError):
        net.embed(np.zeros((16, 16)))


def test_contrastive_loss_matches_loop():
    net = LightNet(LightNetConfig(resolution=16, channels=(4,), embed_dim=8, seed=3))
    rng = np.random.default_rng(4)
    pairs = [LightingPair(img_a=rng.uniform(size=(16, 16)),
                          img_b=rng.uniform(size=(16, 16)),
                          same_light=bool(i % 2)) for i in range(6)]
    a = torch.from_numpy(np.stack([p.img_a for p in pairs])).unsqueeze(1)
    b = torch.from_numpy(np.stack([p.img_b for p in pairs])).unsqueeze(1)
    same = torch.tensor([p.same_light for p in pairs])
    got = float(contrastive_loss(net(a), net(b), same, margin=1.0).detach())
    want = 0.0
    for p in pairs:
        d = float(np.linalg.norm(net.embed(p.img_a) - net.embed(p.img_b)))
        want += d ** 2 if p.same_light else max(0.0, 1.0 - d) ** 2
    want /= len(pairs)
    assert got == pytest.approx(want, rel=1e-10)


def test_lighting_pair_validation():
    ok = np.zeros((8, 8))
    with pytest.raises(ValueError):
        LightingPair(img_a=ok, img_b=np.zeros((4, 4)), same_light=True)
    bad = ok.copy()
    bad[0, 0] = np.inf
    with pytest.raises(ValueError):
        LightingPair(img_a=bad, img_b=ok, same_light=False)


def test_training_reduces_loss_and_is_deterministic():
    ds = make_relight_dataset(50, resolution=16, n_identities=6, n_lights=4,
                              holdout=2)
    pairs = lighting_pairs(ds, ds.train_ids, 64, seed=51)
    cfg = LightNetConfig(resolution=16, channels=(4, 8), embed_dim=8, seed=52)
    tcfg = LightTrainConfig(epochs=4, batch_size=16, lr=2e-3, margin=1.0, seed=53)
    net1, curve1 = train_lightnet(pairs, tcfg, net_config=cfg)
    net2, curve2 = train_lightnet(pairs, tcfg, net_config=cfg)
    assert curve1[-1]["loss"] < curve1[0]["loss"]
    assert [r["loss"] for r in curve1] == [r["loss"] for r in curve2]
    for (ka, va), (kb, vb) in zip(net1.state_dict().items(),
                                  net2.state_dict().items()):
        assert ka == kb and torch.equal(va, vb)


def test_train_rejects_single_class_pairs():
    rng = np.random.default_rng(54)
    pairs = [LightingPair(img_a=rng.uniform(size=(16, 16)),
                          img_b=rng.uniform(size=(16, 16)), same_light=True)
             for _ in range(8)]
    cfg = LightNetConfig(resolution=16, channels=(4,), embed_dim=8)
    with pytest.raises(ValueError):
        train_lightnet(pairs, LightTrainConfig(epochs=1), net_config=cfg)


def test_save_load_roundtrip(tmp_path):
    net = LightNet(LightNetConfig(resolution=16, channels=(4, 8), embed_dim=8, seed=5))
    p = tmp_path / "ln.sstb"
    net.save(p)
    back = LightNet.load(p)
    lum = np.random.default_rng(6).uniform(size=(16, 16))
    assert np.array_equal(net.embed(lum), back.embed(lum))
    assert back.config.embed_dim == 8
