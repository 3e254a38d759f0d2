import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from efab.ml import (EmptyDataset, Track, extract_features, load_tracks,
                     make_dataset, save_tracks, split_dataset, synth_track,
                     tracks_to_features)


def test_single_deposit_lands_in_one_profile_bin():
    charge = np.zeros((8, 21, 13))
    charge[0, 5, 7] = 3.25
    fv = extract_features(Track(charge, y0=0.0, pt_truth=5.0))
    assert fv[7] == 3.25
    assert all(fv[j] == 0 for j in range(13) if j != 7)


def test_zero_tensor_keeps_y0():
    fv = extract_features(Track(np.zeros((8, 21, 13)), y0=1.5, pt_truth=1.0))
    assert list(fv[:13]) == [0.0] * 13
    assert fv[13] == 1.5


@given(hnp.arrays(np.float64, (8, 21, 13), elements=st.floats(0, 1e3)))
@settings(max_examples=30, deadline=None)
def test_profile_conserves_total_charge(charge):
    fv = extract_features(Track(charge, y0=0.0, pt_truth=3.0))
    assert np.isclose(fv[:13].sum(), charge.sum(), rtol=1e-12, atol=1e-9)


def test_track_shape_validated():
    with pytest.raises(ValueError):
        Track(np.zeros((8, 21, 12)), y0=0.0, pt_truth=1.0)
    with pytest.raises(ValueError):
        Track(-np.ones((8, 21, 13)), y0=0.0, pt_truth=1.0)


def test_stiff_tracks_have_narrow_support():
    rng = np.random.default_rng(0)
    for _ in range(50):
        t = synth_track("signal", rng)
        if t.pt_truth > 9:
            support = (extract_features(t)[:13] > 0).sum()
            assert support <= 2


def test_soft_tracks_clip_to_full_sensor():
    rng = np.random.default_rng(1)
    found = 0
    for _ in range(200):
        t = synth_track("background", rng)
        if t.pt_truth < 0.25:
            support = (extract_features(t)[:13] > 0).sum()
            assert support >= 6  # 41-pixel segment clipped by the sensor edge
            found += 1
    assert found > 0


def test_generator_deterministic_per_seed():
    a = synth_track("signal", np.random.default_rng(77))
    b = synth_track("signal", np.random.default_rng(77))
    assert np.array_equal(a.charge, b.charge)
    assert (a.y0, a.pt_truth) == (b.y0, b.pt_truth)


def test_split_10_into_8_and_2():
    tracks = list(range(10))
    train, test = split_dataset(tracks, 0.8, seed=0)
    assert len(train) == 8 and len(test) == 2


def test_split_is_exhaustive_and_disjoint():
    tracks = list(range(101))
    train, test = split_dataset(tracks, 0.8, seed=3)
    assert sorted(train + test) == tracks


def test_split_at_full_dataset_scale():
    # 550,000 tracks at 80%:20% -> 440,000 / 110,000
    tracks = range(550_000)
    train, test = split_dataset(tracks, 0.8, seed=1)
    assert len(train) == 440_000 and len(test) == 110_000


def test_split_empty_rejected():
    with pytest.raises(EmptyDataset):
        split_dataset([], 0.8, seed=0)


def test_labels_follow_pt_cut():
    tracks = make_dataset(200, seed=5)
    _, y = tracks_to_features(tracks)
    for t, label in zip(tracks, y):
        assert label == (1 if t.pt_truth > 2.0 else 0)


@pytest.mark.parametrize("suffix", ["txt", "txt.gz"])
def test_track_file_round_trip(tmp_path, suffix):
    tracks = make_dataset(5, seed=9)
    path = tmp_path / f"tracks.{suffix}"
    save_tracks(path, tracks)
    again = load_tracks(path)
    assert len(again) == 5
    for a, b in zip(tracks, again):
        assert np.array_equal(a.charge, b.charge)
        assert (a.y0, a.pt_truth) == (b.y0, b.pt_truth)
