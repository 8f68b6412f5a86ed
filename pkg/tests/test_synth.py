from dataclasses import replace

import numpy as np
import pytest

from plumekit import synth
from plumekit.classifiers import classify, estimate_background
from plumekit.errors import DimensionMismatch, MissingKey, UnknownKey, UnparseableValue
from plumekit.evaluation import auc_score


def ace_auc(spec):
    target = synth.default_signature(spec.d)
    cube, mask = synth.generate(spec, target)
    scores = classify(cube, target, "ace", estimate_background(cube)).scores
    return auc_score(scores, mask)


def test_generator_is_pure():
    spec = synth.SceneSpec(h=16, v=12, d=6, seed=123)
    t = synth.default_signature(6)
    a, ma = synth.generate(spec, t)
    np.random.seed(0)
    np.random.random(100)
    b, mb = synth.generate(spec, t)
    assert a.tobytes() == b.tobytes() and ma.tobytes() == mb.tobytes()
    c, _ = synth.generate(replace(spec, seed=124), t)
    assert not np.array_equal(a, c)


def test_counter_normals_are_position_addressed():
    full = synth.counter_normal(7, 1, (10, 10))
    assert full.shape == (10, 10)
    again = synth.counter_normal(7, 1, (100,))
    np.testing.assert_array_equal(full.ravel(), again)
    assert not np.array_equal(full.ravel(), synth.counter_normal(7, 2, (100,)))


def test_counter_normals_are_standard():
    z = synth.counter_normal(1, 1, (200000,))
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01
    u = synth.counter_uniform(1, 3, np.arange(100000, dtype=np.uint64))
    assert u.min() >= 0 and u.max() < 1 and abs(u.mean() - 0.5) < 0.005


def test_noiseless_hard_edge_plume_is_exact_subtraction():
    spec = synth.SceneSpec(h=20, v=24, d=5, seed=1, clutter_sigma=0, noise_sigma=0,
                           edge_width=0, alpha=1.0)
    t = synth.default_signature(5) + 0.3
    cube, mask = synth.generate(spec, t)
    clean = np.broadcast_to(synth.mean_profile(spec), cube.shape)
    inside = mask == 1
    assert inside.any()
    np.testing.assert_array_equal(cube[inside], clean[inside] - t)
    np.testing.assert_array_equal(cube[~inside], clean[~inside])
    assert not (mask == 2).any()


def test_negative_alpha_adds_plume():
    spec = synth.SceneSpec(h=20, v=20, d=4, seed=1, clutter_sigma=0, noise_sigma=0,
                           edge_width=0, alpha=-2.0)
    t = np.ones(4)
    cube, mask = synth.generate(spec, t)
    np.testing.assert_allclose((cube - synth.mean_profile(spec))[mask == 1], 2.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_mask_consistency(seed):
    spec = synth.SceneSpec(h=40, v=50, d=3, seed=seed, center_row=17.3, center_col=26.0,
                           radius_row=8.0, radius_col=12.5, edge_width=5.0)
    m, dist = synth.plume_membership(spec)
    mask = synth.ground_truth(spec)
    assert np.all(m[mask == 1] >= 0.5)
    rows, cols = np.nonzero(mask == 1)
    assert rows.min() >= spec.center_row - spec.radius_row
    assert rows.max() <= spec.center_row + spec.radius_row
    assert cols.min() >= spec.center_col - spec.radius_col
    assert cols.max() <= spec.center_col + spec.radius_col
    b = mask == 2
    assert b.any()
    assert np.all((m[b] > 0) & (m[b] < 0.5)) and np.all(dist[b] <= spec.boundary_width)
    assert np.all(mask[m == 0] == 0)


def test_signature_length_checked():
    with pytest.raises(DimensionMismatch):
        synth.generate(synth.SceneSpec(h=8, v=8, d=4, seed=0), np.ones(5))


@pytest.mark.parametrize("kwargs", [dict(radius_row=5.0), dict(noise_sigma=-1.0),
                                    dict(spatial_corr=0), dict(h=0)])
def test_spec_invariants(kwargs):
    base = dict(h=10, v=10, d=3, seed=0)
    base.update(kwargs)
    with pytest.raises(ValueError):
        synth.SceneSpec(**base)


def test_spec_file_minimal(tmp_path):
    f = tmp_path / "s.txt"
    f.write_text("# scene\nh = 32\nv = 30\nd = 8\nseed = 5\nalpha = 0.25\n")
    spec = synth.spec_from_file(f)
    assert (spec.h, spec.v, spec.d, spec.seed, spec.alpha) == (32, 30, 8, 5, 0.25)


def test_spec_file_errors(tmp_path):
    f = tmp_path / "s.txt"
    f.write_text("h = 32\nv = 30\nd = 8\n")
    with pytest.raises(MissingKey) as info:
        synth.spec_from_file(f)
    assert info.value.key == "seed"
    f.write_text("h = 32\nv = 30\nd = 8\nseed = 1\ncolour = red\n")
    with pytest.raises(UnknownKey):
        synth.spec_from_file(f)
    f.write_text("h = 32\nv = 30\nd = eight\nseed = 1\n")
    with pytest.raises(UnparseableValue):
        synth.spec_from_file(f)


def test_spec_text_round_trip(tmp_path):
    spec = synth.default_scene_spec(seed=9, alpha=0.5)
    f = tmp_path / "s.txt"
    f.write_text(synth.spec_to_text(spec))
    assert synth.spec_from_file(f) == spec


def test_background_is_spatially_correlated():
    spec = synth.SceneSpec(h=64, v=64, d=6, seed=3, noise_sigma=0.0)
    bg = synth.background(spec) - synth.mean_profile(spec)
    x = bg[:, :, 2]
    lag1 = np.corrcoef(x[:, :-1].ravel(), x[:, 1:].ravel())[0, 1]
    lag6 = np.corrcoef(x[:, :-6].ravel(), x[:, 6:].ravel())[0, 1]
    assert lag1 > 0.4 and abs(lag6) < 0.1
    band = np.corrcoef(bg[:, :, 2].ravel(), bg[:, :, 3].ravel())[0, 1]
    assert band > 0.5


def test_detectability_grows_with_alpha():
    alphas = (0.0, 0.5, 1.0, 2.0)
    wins = 0
    for seed in range(5):
        aucs = [ace_auc(synth.default_scene_spec(seed=seed, alpha=a)) for a in alphas]
        wins += all(b >= a for a, b in zip(aucs, aucs[1:]))
    assert wins >= 3
