import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdrvqa.chips import (
    DEFAULT_TAPS, N_CHIP_FEATURES, ChipAccumulator, ChipConfig, angle_kurtosis, block_grid, candidate_angles, displacement,
    excess_kurtosis, extract_chips, gather_chips, gradient_magnitude, normalize_taps, temporal_filter,
)
from hdrvqa.nss import fit_ggd
from hdrvqa.video_io import FramePlane

UNIT_TAPS = np.array(DEFAULT_TAPS) / np.sqrt(10.0)


def translating_texture(angle, rng, h=120, w=120, T=5, s=5):
    """Blockwise-heteroscedastic noise moved one pixel per frame along ``angle``.

    Tracking the motion keeps each chip inside one block (Gaussian); any
    other direction mixes blocks of different variance (heavy tails).
    """
    nb = (h + 20) // s + 2
    sig = np.exp(rng.uniform(np.log(0.1), np.log(10), (nb, nb)))
    big = np.kron(sig, np.ones((s, s))) * rng.standard_normal((nb * s, nb * s))
    frames = []
    for t in range(T):
        dy, dx = displacement(angle, t - T // 2)
        frames.append(big[10 - dy:10 - dy + h, 10 - dx:10 - dx + w])
    return np.stack(frames)


def test_tap_normalization():
    np.testing.assert_allclose(normalize_taps(DEFAULT_TAPS), UNIT_TAPS, rtol=1e-15)
    assert np.sum(normalize_taps(DEFAULT_TAPS) ** 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        normalize_taps([0, 0, 0])


def test_sobel_step_edge():
    v = np.zeros((32, 32))
    v[:, 16:] = 1.0
    g = gradient_magnitude(v)
    np.testing.assert_allclose(g[:, 15], 4.0)
    np.testing.assert_allclose(g[:, 16], 4.0)
    assert np.all(g[:, :14] == 0) and np.all(g[:, 18:] == 0)


def test_sobel_ramp():
    v = np.add.outer(np.zeros(20), 0.5 * np.arange(20.0))
    # interior horizontal ramp of slope 0.5: Sobel gain 8 over a 2-pixel span
    np.testing.assert_allclose(gradient_magnitude(v)[1:-1, 1:-1], 4.0 * 0.5 * 2, rtol=1e-12)


def test_sobel_diagonal_ramp_constant_interior():
    i, j = np.mgrid[0:24, 0:24]
    g = gradient_magnitude(0.01 * (i + j))
    np.testing.assert_allclose(g[1:-1, 1:-1], 0.08 * np.sqrt(2), rtol=1e-12)
    np.testing.assert_array_equal(gradient_magnitude(np.full((9, 9), 0.3)), 0.0)


def test_fir_impulse_response():
    vol = np.zeros((9, 1, 1))
    vol[4] = 1.0
    out = temporal_filter(vol, UNIT_TAPS)[:, 0, 0]
    # 'valid' convolution: the impulse comes back with taps in order
    np.testing.assert_allclose(out, UNIT_TAPS, atol=1e-15)


def test_fir_matches_numpy_convolve(rng):
    vol = rng.standard_normal((12, 4, 3))
    out = temporal_filter(vol, UNIT_TAPS)
    ref = np.apply_along_axis(lambda s: np.convolve(s, UNIT_TAPS, mode="valid"), 0, vol)
    np.testing.assert_allclose(out, ref, atol=1e-13)


def test_fir_kills_static_and_checks_input():
    vol = np.broadcast_to(np.random.default_rng(0).random((6, 6)), (8, 6, 6))
    np.testing.assert_allclose(temporal_filter(vol), 0.0, atol=1e-14)
    with pytest.raises(ValueError):
        temporal_filter(np.zeros((4, 3, 3)))
    with pytest.raises(ValueError):
        temporal_filter(np.zeros((8, 3, 3)), [1, 2, 3])
    with pytest.raises(ValueError):
        ChipConfig(taps=(1, 1, 1))


def test_displacements():
    a = candidate_angles(6)
    np.testing.assert_allclose(a, np.arange(6) * np.pi / 6)
    assert displacement(0.0, 2) == (0, 2)
    assert displacement(np.pi / 2, 2) == (2, 0)
    assert displacement(np.pi / 6, 2) == (1, 2)
    assert displacement(np.pi / 6, -2) == (-1, -2)
    assert displacement(5 * np.pi / 6, 1) == (1, -1)


def test_gather_matches_loop_oracle(rng):
    vol = rng.standard_normal((5, 20, 20))
    m, nby, nbx = block_grid((20, 20), 5, 5)
    assert (m, nby, nbx) == (2, 3, 3)
    for angle in candidate_angles(6):
        got = gather_chips(vol, angle, 5)
        for by in range(nby):
            for bx in range(nbx):
                for t in range(5):
                    d = t - 2
                    dy = int(np.floor(d * np.sin(angle) + 0.5))
                    dx = int(np.floor(d * np.cos(angle) + 0.5))
                    y0, x0 = m + 5 * by + dy, m + 5 * bx + dx
                    np.testing.assert_array_equal(got[by, bx, t], vol[t, y0:y0 + 5, x0:x0 + 5])


def test_excess_kurtosis_known_values(rng):
    assert excess_kurtosis([1.0, -1.0] * 50) == pytest.approx(-2.0)
    x = rng.standard_normal(1_000_000)
    assert abs(excess_kurtosis(x)) < 0.02


def test_gaussian_volume_chip_kurtosis():
    vol = np.random.default_rng(7).standard_normal((5, 400, 400))
    cs = extract_chips(vol)
    # per-block minimum |k| selection biases towards light tails, but only slightly
    assert -0.1 <= cs.excess_kurtosis <= 0.1


def test_gaussian_volume_every_angle_near_gaussian():
    vol = np.random.default_rng(8).standard_normal((5, 300, 300))
    k = angle_kurtosis(vol, candidate_angles(6))
    assert np.all(np.abs(k) <= 0.1)
    alpha = fit_ggd(extract_chips(vol).samples).alpha
    assert 1.9 <= alpha <= 2.1


@pytest.mark.parametrize("k", range(6))
def test_translation_direction_recovered(k):
    angles = candidate_angles(6)
    hits = 0
    for trial in range(4):
        vol = translating_texture(angles[k], np.random.default_rng(100 * k + trial))
        cs = extract_chips(vol, angles)
        hits += cs.chosen_angle == angles[k]
    assert hits == 4


def path(angle, T=5):
    return [displacement(angle, d) for d in range(-(T // 2), T // 2 + 1)]


# image transforms and how they act on a (dy, dx) step
TRANSFORMS = {
    "rot_cw": (lambda v: np.rot90(v, -1, axes=(1, 2)), lambda dy, dx: (dx, -dy)),
    "mirror": (lambda v: v[:, :, ::-1], lambda dy, dx: (dy, -dx)),
    "transpose": (lambda v: v.transpose(0, 2, 1), lambda dy, dx: (dx, dy)),
}


def mapped_candidates():
    # (transform, k, k') where the transformed path of angle k is exactly candidate path k'
    angles = candidate_angles(6)
    out = []
    for name, (_, step) in TRANSFORMS.items():
        for k, a in enumerate(angles):
            moved = [step(*p) for p in path(a)]
            out += [(name, k, j) for j, b in enumerate(angles) if path(b) == moved]
    return out


def test_transform_table_is_nontrivial():
    pairs = mapped_candidates()
    # rotation by pi/2 (mod pi) and the mirror theta -> pi - theta where rounding allows
    assert ("rot_cw", 0, 3) in pairs and ("mirror", 1, 5) in pairs and ("mirror", 3, 3) in pairs
    assert len(pairs) >= 6


@settings(max_examples=20)
@given(st.sampled_from(mapped_candidates()), st.integers(0, 2**16))
def test_selection_commutes_with_grid_symmetries(case, seed):
    # rotating or mirroring the frames moves the chosen angle accordingly
    name, k, j = case
    angles = candidate_angles(6)
    vol = translating_texture(angles[k], np.random.default_rng(seed))
    moved = np.ascontiguousarray(TRANSFORMS[name][0](vol))
    assert extract_chips(moved, angles).chosen_angle == angles[j]


def test_chip_shapes_and_small_volume():
    cs = extract_chips(np.random.default_rng(0).standard_normal((5, 24, 31)))
    _, nby, nbx = block_grid((24, 31), 5, 5)
    assert cs.samples.shape == (nby * nbx, 5, 5, 5)
    assert cs.block_angles.shape == (nby * nbx,)
    with pytest.raises(ValueError):
        gather_chips(np.zeros((5, 6, 6)), 0.0, 5)


def test_accumulator_static_video_zero_fills():
    acc = ChipAccumulator()
    frame = FramePlane(np.random.default_rng(3).random((64, 64)), "Y")
    for _ in range(9):
        acc.push(frame)
    assert acc.n_volumes == 1
    np.testing.assert_array_equal(acc.features(), np.zeros(N_CHIP_FEATURES))
    assert acc.diagnostics


def test_accumulator_volume_count(rng):
    acc = ChipAccumulator()
    for _ in range(4 + 5 * 2 + 3):
        acc.push(FramePlane(rng.random((48, 48)), "Y"))
    assert acc.n_volumes == 2
    f = acc.features()
    assert f.shape == (N_CHIP_FEATURES,) and np.all(np.isfinite(f)) and np.any(f != 0)


def test_accumulator_too_short(rng):
    acc = ChipAccumulator()
    for _ in range(8):
        acc.push(FramePlane(rng.random((48, 48)), "Y"))
    np.testing.assert_array_equal(acc.features(), 0.0)
