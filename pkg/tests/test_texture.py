import numpy as np
import pytest

from sfenet.texture import GLCM_OFFSETS, Glcm, glcm, glcm_stats, lbp, text_features


np.random.seed(666)


def test_lbp_examples():
    assert np.all(lbp(np.full((5, 6), 0.3)) == 255)

    peak = np.zeros((3, 3))
    peak[1, 1] = 1.0
    assert lbp(peak)[0, 0] == 0

    # neighbours clockwise from the top-left: .1 .2 .3 .4 .9 .6 .7 .8 against .5
    img = np.array([[.1, .2, .3], [.8, .5, .4], [.7, .6, .9]])
    assert lbp(img).tolist() == [[16 + 32 + 64 + 128]]


def test_lbp_checkerboard():
    board = (np.indices((8, 8)).sum(0) % 2).astype(np.float64)
    codes = lbp(board)
    assert set(np.unique(codes)) == {85, 255}
    assert np.all(codes[board[1:-1, 1:-1] == 1] == 85)


def test_lbp_monotone_invariance():
    img = np.random.uniform(size=(10, 10))
    assert np.array_equal(lbp(img), lbp(img ** 2))
    assert np.array_equal(lbp(img), lbp(0.5 * img + 0.25))


def test_lbp_too_small():
    with pytest.raises(ValueError):
        lbp(np.zeros((2, 5)))


def test_glcm_hand_example():
    img = np.array([[0.0, 0.0], [1.0, 1.0]])
    m = glcm(img, levels=2, offset=(0, 1), symmetric=False)
    assert np.array_equal(m.probs, [[0.5, 0.0], [0.0, 0.5]])
    s = glcm_stats(m)
    assert s['contrast'] == 0
    assert s['energy'] == 0.5
    assert s['homogeneity'] == 1
    assert s['correlation'] == pytest.approx(1.0)


def test_glcm_properties():
    for offset in GLCM_OFFSETS:
        m = glcm(np.full((6, 6), 0.55), levels=8, offset=offset)
        assert m.probs[4, 4] == 1.0 and m.probs.sum() == 1.0

        m = glcm(np.random.uniform(size=(9, 11)), levels=8, offset=offset)
        assert np.array_equal(m.probs, m.probs.T)
        assert m.probs.sum() == pytest.approx(1.0)

    for bad in ({'levels': 1}, {'offset': (0, 0)}, {'offset': (5, 0)}):
        with pytest.raises(ValueError):
            glcm(np.zeros((5, 5)), **bad)


def test_glcm_stats_examples():
    diag = Glcm(levels=4, offset=(0, 1), probs=np.diag([0.1, 0.2, 0.3, 0.4]))
    s = glcm_stats(diag)
    assert s['contrast'] == 0 and s['homogeneity'] == pytest.approx(1.0)

    uniform = Glcm(levels=4, offset=(0, 1), probs=np.full((4, 4), 1 / 16))
    assert glcm_stats(uniform)['energy'] == pytest.approx(1 / 16)

    single = Glcm(levels=4, offset=(0, 1), probs=np.zeros((4, 4)))
    single.probs[2, 2] = 1.0
    assert glcm_stats(single) == {'contrast': 0.0, 'energy': 1.0, 'homogeneity': 1.0, 'correlation': 0.0}


def test_text_features():
    f = text_features(np.full((8, 8, 3), 0.4))
    assert f.lbp_histogram[255] == 1.0 and f.lbp_histogram.sum() == 1.0
    assert all(f.glcm_stats[o]['contrast'] == 0 for o in GLCM_OFFSETS)
    assert f.flatten().shape == (256 + 16,)

    f = text_features(np.random.uniform(size=(16, 16, 3)))
    assert f.lbp_histogram.sum() == pytest.approx(1.0)
    assert np.array_equal(f.flatten()[256:260], [f.glcm_stats[(0, 1)][k] for k in
                                                ('contrast', 'energy', 'homogeneity', 'correlation')])


def test_level_shift_invariance():
    # values stay inside their quantization bins after the shift
    levels = np.random.randint(0, 8, size=(10, 10))
    img = (levels + 0.3) / 8
    shifted = img + 0.2 / 8
    assert np.array_equal(lbp(img), lbp(shifted))
    assert np.array_equal(glcm(img).probs, glcm(shifted).probs)
