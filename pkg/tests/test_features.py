import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hdrvqa.errors import DataError, LayoutMismatchError
from hdrvqa.features import (
    BLOCKS, FEATURE_NAMES, LAYOUT_VERSION, N_FEATURES, N_FRAME_FEATURES, ExtractionConfig, FeatureVector,
    assemble_frame, channel_features36, extract_blocks, extract_video, frame_features, pool_video,
    read_features_csv, scale_features18, temporal_std, write_features_csv,
)
from hdrvqa.mscn import C_LINEAR, mscn, paired_products
from hdrvqa.nss import fit_aggd, fit_ggd
from hdrvqa.video_io import FramePlane, open_video


def moving_frames(n, h=48, w=64, seed=0, chroma=0.04):
    rng = np.random.default_rng(seed)
    base = rng.random((h + n, w + n))
    cb = rng.random((h + n, w + n))
    out = []
    for k in range(n):
        y = 0.2 + 0.6 * base[k:k + h, k:k + w]
        c = 0.5 + chroma * (cb[k:k + h, k:k + w] - 0.5)
        out.append((y, c, 1.0 - c))
    return out


def test_layout_constants():
    assert N_FEATURES == 612 and N_FRAME_FEATURES == 288
    assert len(FEATURE_NAMES) == len(set(FEATURE_NAMES)) == 612
    sizes = {k: hi - lo for k, (lo, hi) in BLOCKS.items()}
    assert sizes == {"luma": 36, "luma_nl": 36, "rgb": 108, "rgb_nl": 108, "luma_std": 36,
                     "luma_nl_std": 36, "rgb_std": 108, "rgb_nl_std": 108, "chips": 36}
    assert FEATURE_NAMES[0] == "luma.s0.ggd.alpha"
    assert FEATURE_NAMES[18] == "luma.s1.ggd.alpha"
    assert FEATURE_NAMES[72] == "rgb.r.s0.ggd.alpha"
    assert FEATURE_NAMES[288] == "luma.s0.ggd.alpha.std5"
    assert FEATURE_NAMES[611] == "chips.s1.d2.sigma_r2"


def test_assemble_frame_order():
    lin = np.arange(144.0)
    nl = 1000 + np.arange(144.0)
    f = assemble_frame(lin, nl)
    np.testing.assert_array_equal(f[:36], lin[:36])
    np.testing.assert_array_equal(f[36:72], nl[:36])
    np.testing.assert_array_equal(f[72:180], lin[36:])
    np.testing.assert_array_equal(f[180:288], nl[36:])


def test_scale_features_match_separate_fits(rng):
    f = mscn(rng.random((40, 52)), C_LINEAR).data
    got = scale_features18(f)
    want = [*fit_ggd(f).as_features()]
    for p in paired_products(f):
        want += [*fit_aggd(p).as_features()]
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-14)


def test_scale_features_zero_fill_constant():
    diag = []
    out = scale_features18(np.zeros((20, 20)), diag, "x")
    np.testing.assert_array_equal(out, 0.0)
    assert len(diag) == 1


def test_channel_features_requires_full_scale(rng):
    with pytest.raises(ValueError):
        channel_features36(FramePlane(rng.random((10, 10)), "Y", 1), C_LINEAR)


def test_achromatic_frame_gives_identical_rgb_blocks(rng):
    y = FramePlane(0.1 + 0.8 * rng.random((40, 48)), "Y")
    half = FramePlane(np.full((40, 48), 0.5), "Cb")
    f = frame_features(y, half, FramePlane(half.data, "Cr")).values
    luma_lin, luma_nl = f[0:36], f[36:72]
    for c in range(3):
        np.testing.assert_allclose(f[72 + 36 * c:108 + 36 * c], luma_lin, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(f[180 + 36 * c:216 + 36 * c], luma_nl, rtol=1e-12, atol=1e-15)


def test_temporal_std_hand_arithmetic():
    col1 = np.arange(1.0, 11.0)  # windows 1..5 and 6..10: population std sqrt(2) each
    col2 = np.array([0, 0, 0, 0, 10, 0, 0, 0, 0, 0], dtype=float)  # stds 4 and 0
    got = temporal_std(np.column_stack([col1, col2]))
    np.testing.assert_allclose(got, [np.sqrt(2), 2.0], rtol=1e-15)
    # trailing partial window is ignored
    m = np.column_stack([np.r_[col1, 100.0, -100.0], np.r_[col2, 5.0, 7.0]])
    np.testing.assert_allclose(temporal_std(m), [np.sqrt(2), 2.0], rtol=1e-15)


def test_temporal_std_too_few_frames():
    diag = []
    np.testing.assert_array_equal(temporal_std(np.ones((4, 3)), diagnostics=diag), 0.0)
    assert diag


@given(st.permutations(range(10)), st.integers(0, 1000))
def test_mean_block_frame_permutation_invariant(perm, seed):
    m = np.random.default_rng(seed).random((10, N_FRAME_FEATURES))
    a = pool_video(m, np.zeros(36)).values
    b = pool_video(m[list(perm)], np.zeros(36)).values
    np.testing.assert_allclose(a[:288], b[:288], rtol=1e-14)


def test_pool_video_checks():
    with pytest.raises(DataError):
        pool_video([], np.zeros(36))
    with pytest.raises(LayoutMismatchError):
        pool_video(np.zeros((5, 288)), np.zeros(35))


def test_constant_video(y4m_factory):
    frames = [(np.full((32, 40), 0.4), np.full((32, 40), 0.5), np.full((32, 40), 0.5))] * 10
    fv = extract_video(open_video(y4m_factory(frames)))
    assert fv.values.shape == (612,)
    # every fit degenerates: zero-filled, never NaN
    np.testing.assert_array_equal(fv.values, 0.0)
    assert fv.diagnostics


def test_static_video_has_zero_std_and_chip_blocks(y4m_factory):
    frames = moving_frames(1)[:1] * 10
    fv = extract_video(open_video(y4m_factory(frames)))
    for b in ("luma_std", "luma_nl_std", "rgb_std", "rgb_nl_std", "chips"):
        np.testing.assert_array_equal(fv.block(b), 0.0)
    assert np.all(fv.block("luma")[[0, 1, 18, 19]] > 0)


def test_extract_video_end_to_end(y4m_factory):
    src = open_video(y4m_factory(moving_frames(10)))
    fv = extract_video(src)
    assert fv.video_id == "clip" and fv.layout_version == LAYOUT_VERSION
    assert np.all(np.isfinite(fv.values))
    assert np.any(fv.block("chips") != 0) and np.any(fv.block("luma_std") != 0)
    again = extract_video(src)
    np.testing.assert_array_equal(fv.values, again.values)


def test_extract_blocks_subset(y4m_factory):
    src = open_video(y4m_factory(moving_frames(10)))
    full = extract_blocks(src)
    only_nl = extract_blocks(src, blocks=("nonlinear",))
    assert set(only_nl) == {"nonlinear"}
    np.testing.assert_array_equal(only_nl["nonlinear"], full["nonlinear"])
    assert full["linear"].shape == (10, 144)


def test_nonlinear_knobs_change_only_nonlinear_block(y4m_factory):
    src = open_video(y4m_factory(moving_frames(5)))
    a = extract_video(src)
    from hdrvqa.expansive import NonlinearityConfig
    b = extract_video(src, ExtractionConfig(nl=NonlinearityConfig(1.0, 9)))
    for blk in ("luma", "rgb", "chips"):
        np.testing.assert_array_equal(a.block(blk), b.block(blk))
    assert np.any(a.block("luma_nl") != b.block("luma_nl"))


def test_csv_round_trip(tmp_path, rng):
    vecs = [FeatureVector(rng.standard_normal(612) * 10.0 ** rng.integers(-20, 20, 612), f"v{i}") for i in range(3)]
    p = tmp_path / "f.csv"
    write_features_csv(p, vecs)
    ids, mat, version = read_features_csv(p)
    assert ids == ["v0", "v1", "v2"] and version == LAYOUT_VERSION
    np.testing.assert_array_equal(mat, np.stack([v.values for v in vecs]))


def test_csv_errors(tmp_path):
    with pytest.raises(LayoutMismatchError):
        write_features_csv(tmp_path / "a.csv", [FeatureVector(np.zeros(5), "x")])
    p = tmp_path / "b.csv"
    p.write_text("id,foo\n")
    with pytest.raises(DataError):
        read_features_csv(p)
    p.write_text("video_id,layout_version,f1\nx,v1,1.0\ny,v2,2.0\n")
    with pytest.raises(LayoutMismatchError):
        read_features_csv(p)
    p.write_text("video_id,layout_version,f1\nx,v1,abc\n")
    with pytest.raises(DataError):
        read_features_csv(p)
