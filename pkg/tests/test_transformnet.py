import numpy as np
import pytest
import torch

from styleswap.transformnet import (BranchSpec, TransformNet, build,
                                    default_branch_spec)


def test_output_shape_and_open_unit_range():
    net = build(32, BranchSpec(widths=(6, 8, 10)), seed=0)
    x = torch.rand(3, 32, 32, dtype=torch.float64)
    with torch.no_grad():
        y = net(x)
        assert y.shape == (3, 32, 32)
        assert float(y.min()) > 0.0 and float(y.max()) < 1.0
        batch = net(torch.rand(2, 3, 32, 32, dtype=torch.float64))
        assert batch.shape == (2, 3, 32, 32)


def test_transform_numpy_wrapper_matches_forward():
    net = build(32, BranchSpec(widths=(6, 8, 10)), seed=1)
    img = np.random.default_rng(0).uniform(size=(32, 32, 3))
    out = net.transform(img)
    with torch.no_grad():
        want = net(torch.from_numpy(img.transpose(2, 0, 1))).numpy().transpose(1, 2, 0)
    assert np.array_equal(out, want)
    assert out.shape == (32, 32, 3)


def test_same_seed_bitwise_identical_nets():
    a = build(32, BranchSpec(widths=(6, 8, 10)), seed=7)
    b = build(32, BranchSpec(widths=(6, 8, 10)), seed=7)
    for (ka, va), (kb, vb) in zip(a.state_dict().items(), b.state_dict().items()):
        assert ka == kb and torch.equal(va, vb)
    c = build(32, BranchSpec(widths=(6, 8, 10)), seed=8)
    assert any(not torch.equal(v, c.state_dict()[k])
               for k, v in a.state_dict().items())


def test_rejects_wrong_resolution_input():
    net = build(32, BranchSpec(widths=(6, 8, 10)), seed=0)
    with pytest.raises(ValueError):
        net(torch.rand(3, 16, 16, dtype=torch.float64))
    with pytest.raises(ValueError):
        build(48)  # not a power of two
    with pytest.raises(ValueError):
        build(8)  # below the minimum input size


def test_default_widths_give_paper_scale_budget():
    net = build(128)
    assert 850_000 <= net.param_count() <= 1_150_000
    grown = net.grow(256)
    assert 1_700_000 <= grown.param_count() <= 2_300_000
    frac = grown.frozen_param_count() / grown.param_count()
    assert 0.4 <= frac <= 0.6


def test_grow_copies_old_tensors_bitwise_and_freezes_them():
    net = build(32, BranchSpec(widths=(6, 8, 10)), seed=3)
    old_state = {k: v.clone() for k, v in net.state_dict().items()}
    grown = net.grow(64, width=12, seed=4)
    assert grown.resolution == 64
    assert grown.n_branches == net.n_branches + 1
    new_state = grown.state_dict()
    for k, v in old_state.items():
        assert k in new_state and torch.equal(new_state[k], v)
    frozen = {name for name, p in grown.named_parameters() if not p.requires_grad}
    for k in old_state:
        assert k in frozen
    trainable = [name for name, p in grown.named_parameters() if p.requires_grad]
    assert trainable, "grown net must have trainable parameters"
    assert all(k not in old_state for k in trainable)


def test_grow_requires_exact_doubling():
    net = build(32, BranchSpec(widths=(6, 8, 10)), seed=0)
    with pytest.raises(ValueError):
        net.grow(128)
    with pytest.raises(ValueError):
        net.grow(32)


def test_grown_net_output_at_new_resolution():
    net = build(32, BranchSpec(widths=(6, 8, 10)), seed=5)
    grown = net.grow(64, width=12, seed=6)
    y = grown(torch.rand(3, 64, 64, dtype=torch.float64))
    assert y.shape == (3, 64, 64)
    with pytest.raises(ValueError):
        grown(torch.rand(3, 32, 32, dtype=torch.float64))


def test_save_load_roundtrip_bitexact(tmp_path):
    net = build(32, BranchSpec(widths=(6, 8, 10)), seed=9)
    grown = net.grow(64, width=12, seed=10)
    p = tmp_path / "net.sstb"
    grown.save(p)
    back = TransformNet.load(p)
    assert back.resolution == 64
    assert back.frozen_branches == grown.frozen_branches
    for (ka, va), (kb, vb) in zip(grown.state_dict().items(),
                                  back.state_dict().items()):
        assert ka == kb and torch.equal(va, vb)
    x = torch.rand(3, 64, 64, dtype=torch.float64)
    with torch.no_grad():
        assert torch.equal(grown(x), back(x))


def test_load_rejects_foreign_bundle(tmp_path):
    from styleswap.tensorio import save_bundle
    p = tmp_path / "junk.sstb"
    save_bundle(p, {"x": np.zeros(3)}, {"format": "something-else"})
    with pytest.raises(ValueError):
        TransformNet.load(p)


def test_default_branch_spec_walks_width_table():
    spec = default_branch_spec(128)
    assert spec.widths == (32, 48, 64, 80, 104)
    with pytest.raises(ValueError):
        default_branch_spec(16)  # table starts at 32 for the shipped widths


def test_branch_spec_validation():
    with pytest.raises(ValueError):
        BranchSpec(widths=())
    with pytest.raises(ValueError):
        BranchSpec(widths=(4, 2))  # below the minimum channel width
    with pytest.raises(ValueError):
        BranchSpec(widths=(8, 8), kernel=4)  # even kernel has no center
