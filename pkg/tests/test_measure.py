import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rydsim.hilbert import BasisConfig, StateVector, enumerate_basis
from rydsim.measure import (DETECTION_PRESETS, DetectionModel, ShotSet, apply_detection_noise,
                            perfect_order_probability, sample, sample_sharded)
from rydsim.patterns import checkerboard, checkerboard_pair


def bell_like():
    b = enumerate_basis(BasisConfig(4))
    return StateVector.from_patterns(b, [0b0101, 0b1010, 0b0000], [1.0, 1.0, np.sqrt(2)])


def test_sampling_is_seeded():
    psi = bell_like()
    a, b, c = sample(psi, 500, 7), sample(psi, 500, 7), sample(psi, 500, 8)
    assert np.array_equal(a.shots, b.shots) and not np.array_equal(a.shots, c.shots)
    assert a.meta["seed"] == 7


def test_sample_frequencies_follow_born_rule():
    psi = bell_like()
    shots = sample(psi, 40_000, 1, grid=(2, 2))
    patterns = shots.shots @ (1 << np.arange(4))
    freq = np.array([np.mean(patterns == p) for p in (0b0000, 0b0101, 0b1010)])
    np.testing.assert_allclose(freq, [0.5, 0.25, 0.25], atol=4 * np.sqrt(0.25 / 40_000))
    assert set(np.unique(patterns)) <= {0b0000, 0b0101, 0b1010}


def test_basis_state_gives_identical_shots():
    b = enumerate_basis(BasisConfig(3))
    shots = sample(StateVector.basis_state(b, 0b110), 20, 0)
    assert np.all(shots.shots == [0, 1, 1])


def test_sampling_rejects_unnormalised_state_and_zero_shots():
    b = enumerate_basis(BasisConfig(2))
    with pytest.raises(ValueError):
        sample(StateVector(b, np.ones(4, complex)), 10, 0)
    with pytest.raises(ValueError):
        sample(StateVector.basis_state(b, 0), 0, 0)


def test_sharded_sampling_concatenates_per_shard_seeds():
    psi = bell_like()
    sharded = sample_sharded(psi, 103, 5, 4)
    parts = [sample(psi, m, 5 + k).shots for k, m in enumerate([26, 26, 26, 25])]
    np.testing.assert_array_equal(sharded.shots, np.concatenate(parts))
    with pytest.raises(ValueError):
        sample_sharded(psi, 10, 0, 0)


def test_ideal_detection_is_identity():
    s = ShotSet(np.random.default_rng(0).integers(0, 2, (50, 9)), (3, 3))
    np.testing.assert_array_equal(apply_detection_noise(s, DetectionModel.ideal(), 1).shots, s.shots)


def test_detection_flip_rates():
    n = 200_000
    zeros = ShotSet(np.zeros((n, 1), np.uint8))
    ones = ShotSet(np.ones((n, 1), np.uint8))
    m = DetectionModel.no_microwave()
    p01 = apply_detection_noise(zeros, m, 3).shots.mean()
    p10 = 1 - apply_detection_noise(ones, m, 3).shots.mean()
    assert abs(p01 - m.p_g_loss) < 5 * np.sqrt(m.p_g_loss / n)
    assert abs(p10 - m.p_r_recapture) < 5 * np.sqrt(m.p_r_recapture / n)
    noisy = apply_detection_noise(zeros, m, 3)
    assert noisy.meta["noise"] == m.to_dict()


def test_detection_presets_and_validation():
    assert DETECTION_PRESETS["microwave"]() == DetectionModel(0.01, 0.009)
    with pytest.raises(ValueError):
        DetectionModel(1.0, 0.0)


def test_csv_roundtrip(tmp_path):
    s = ShotSet(np.random.default_rng(1).integers(0, 2, (7, 6)), (3, 2), {"seed": 4})
    path = s.write_csv(tmp_path / "shots.csv", ["header one"])
    assert path.read_text().startswith("# header one\nsite_0,")
    back = ShotSet.read_csv(path)
    np.testing.assert_array_equal(back.shots, s.shots)
    assert back.grid == (3, 2) and back.meta == {"seed": 4}


def test_shotset_validation_and_images():
    with pytest.raises(ValueError):
        ShotSet(np.array([[0, 2]]))
    with pytest.raises(ValueError):
        ShotSet(np.zeros((2, 6)), (4, 2))
    im = checkerboard(3, 2)
    s = ShotSet.from_images(im)
    np.testing.assert_array_equal(s.images()[0], im)
    assert s.grid == (3, 2)
    with pytest.raises(ValueError):
        ShotSet(np.zeros((1, 4))).images()


def test_perfect_order_probability():
    a, b = checkerboard_pair(4, 4)
    other = np.zeros((4, 4), np.uint8)
    s = ShotSet.from_images(np.stack([a, b, a, other]))
    assert perfect_order_probability(s, (a, b)) == 0.75
    assert perfect_order_probability(s, (a,)) == 0.5
    with pytest.raises(ValueError):
        perfect_order_probability(s, (np.zeros((3, 3)),))


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 31))
def test_bytes_are_deterministic(nx, ny, seed):
    s = ShotSet(np.random.default_rng(seed).integers(0, 2, (5, nx * ny)), (nx, ny))
    assert s.to_bytes() == ShotSet(s.shots.copy(), (nx, ny)).to_bytes()
