import numpy as np
import pytest

from styleswap.geometry import estimate_affine, landmark_distance
from styleswap.synth import (SceneFixture, canonical_landmarks, face_mask,
                             lambert_render, lighting_pairs,
                             make_aligned_face, make_face_corpus,
                             make_relight_dataset, make_scene,
                             template_landmarks_128)


def test_template_layout():
    pts = template_landmarks_128()
    assert pts.shape == (68, 2)
    assert pts.min() > 0 and pts.max() < 128
    # symmetric about the frame axis: total x mass sits at the centre
    assert np.mean(pts[:, 0]) == pytest.approx(63.5, abs=1e-9)


def test_face_corpus_deterministic_and_in_range():
    a = make_face_corpus(5, 4, 64)
    b = make_face_corpus(5, 4, 64)
    assert len(a) == 4
    for (ia, la), (ib, lb) in zip(a, b):
        assert np.array_equal(ia, ib)
        assert np.array_equal(la.points, lb.points)
        assert ia.shape == (64, 64, 3)
        assert ia.min() >= 0.0 and ia.max() <= 1.0
        assert la.points.min() >= 0.0 and la.points.max() <= 63.0


def test_corpus_members_differ():
    faces = make_face_corpus(6, 3, 64)
    assert not np.array_equal(faces[0][0], faces[1][0])
    assert not np.array_equal(faces[0][1].points, faces[1][1].points)


def test_face_mask_interior_and_erosion():
    _, lm = make_aligned_face(np.random.default_rng(7), 64)
    tight = face_mask(lm.points, (64, 64), erode=3)
    loose = face_mask(lm.points, (64, 64), erode=0)
    assert tight.dtype == bool
    assert 0 < tight.sum() < loose.sum()
    assert np.all(loose[tight])  # erosion only removes pixels
    # mask never touches the frame border
    assert not tight[0].any() and not tight[-1].any()
    assert not tight[:, 0].any() and not tight[:, -1].any()


def test_make_scene_fixture_contract():
    rng = np.random.default_rng(8)
    scene = make_scene(rng, (96, 128))
    assert isinstance(scene, SceneFixture)
    assert scene.image.shape == (96, 128, 3)
    assert scene.mask.shape == (96, 128)
    assert scene.image.min() >= 0.0 and scene.image.max() <= 1.0
    pts = scene.landmarks.points
    assert pts[:, 0].min() > 0 and pts[:, 0].max() < 128
    assert pts[:, 1].min() > 0 and pts[:, 1].max() < 96
    assert scene.mask.sum() > 100
    # the mask hugs the face: every masked pixel near the landmark bbox
    ys, xs = np.nonzero(scene.mask)
    assert xs.min() >= pts[:, 0].min() - 2 and xs.max() <= pts[:, 0].max() + 2
    assert ys.min() >= pts[:, 1].min() - 8 and ys.max() <= pts[:, 1].max() + 2


def test_make_scene_pose_is_nontrivial():
    rng = np.random.default_rng(9)
    scene = make_scene(rng, (96, 128))
    t = estimate_affine(canonical_landmarks(128), scene.landmarks)
    # some rotation or scale away from identity
    assert np.abs(t.matrix - np.eye(2)).max() > 0.05


def test_scene_too_small_raises():
    with pytest.raises(RuntimeError):
        make_scene(np.random.default_rng(10), (8, 8))


def test_relight_dataset_shapes_and_split():
    ds = make_relight_dataset(11, resolution=16, n_identities=5, n_lights=3,
                              holdout=2)
    assert ds.images.shape == (5, 3, 16, 16)
    assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0
    assert len(ds.train_ids) == 3 and len(ds.holdout_ids) == 2
    assert set(ds.train_ids) | set(ds.holdout_ids) == set(range(5))
    assert set(ds.train_ids) & set(ds.holdout_ids) == set()


def test_relight_same_light_shares_direction():
    ds = make_relight_dataset(12, resolution=16, n_identities=4, n_lights=3,
                              holdout=1)
    # same column, different identities: same light; same row: same identity
    assert not np.array_equal(ds.images[0, 0], ds.images[1, 0])
    assert not np.array_equal(ds.images[0, 0], ds.images[0, 1])


def test_lambert_render_flat_surface_is_uniform():
    h = np.zeros((16, 16))
    out = lambert_render(h, np.array([0.0, 0.0, 1.0]))
    assert out.shape == (16, 16)
    assert np.ptp(out) < 1e-12


def test_lighting_pairs_label_balance_and_determinism():
    ds = make_relight_dataset(13, resolution=16, n_identities=6, n_lights=4,
                              holdout=2)
    pairs = lighting_pairs(ds, ds.train_ids, 40, seed=14)
    again = lighting_pairs(ds, ds.train_ids, 40, seed=14)
    assert len(pairs) == 40
    same = [p for p in pairs if p.same_light]
    assert len(same) == 20
    for p, q in zip(pairs, again):
        assert np.array_equal(p.img_a, q.img_a) and p.same_light == q.same_light


def test_lighting_pairs_use_only_given_identities():
    ds = make_relight_dataset(15, resolution=16, n_identities=6, n_lights=4,
                              holdout=2)
    pairs = lighting_pairs(ds, ds.holdout_ids, 30, seed=16)
    allowed = {ds.images[i, l].tobytes()
               for i in ds.holdout_ids for l in range(4)}
    for p in pairs:
        assert p.img_a.tobytes() in allowed and p.img_b.tobytes() in allowed


def test_aligned_face_tracks_its_landmarks():
    # two very different jitters must produce different renders, and each
    # render's landmarks must stay close to the reference layout
    img1, lm1 = make_aligned_face(np.random.default_rng(17), 64)
    img2, lm2 = make_aligned_face(np.random.default_rng(18), 64)
    assert not np.array_equal(img1, img2)
    base = canonical_landmarks(64)
    assert landmark_distance(lm1, base) < 30
    assert landmark_distance(lm2, base) < 30
    assert landmark_distance(lm1, lm2) > 0.5
