import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from sceneparse.exceptions import InvalidInputError
from sceneparse.imgseg import (
    SegParams,
    SuperpixelMap,
    compute_k,
    gaussian_smooth,
    read_superpixel_map,
    segment,
    superpixel_stats,
    write_superpixel_map,
)


def random_images(n=50, seed=0):
    """Blocky color patches plus noise, sizes between 12x12 and 40x40."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        h, w = rng.integers(12, 41, 2)
        cell = int(rng.integers(3, 10))
        coarse = rng.integers(0, 256, (h // cell + 1, w // cell + 1, 3))
        img = np.repeat(np.repeat(coarse, cell, 0), cell, 1)[:h, :w]
        img = img + rng.normal(0, 8, img.shape)
        out.append(np.clip(img, 0, 255).astype(np.uint8))
    return out


CORPUS = random_images()


# compute_k and smoothing -----------------------------------------------------

@pytest.mark.parametrize("d, k", [(640, 200.0), (320, 200.0), (1, 200.0), (2560, 400.0)])
def test_compute_k(d, k):
    assert compute_k(d) == k


def test_compute_k_rejects_empty():
    with pytest.raises(InvalidInputError):
        compute_k(0)


def test_smooth_sigma_zero_is_identity():
    img = np.random.default_rng(1).integers(0, 256, (7, 9, 3))
    np.testing.assert_array_equal(gaussian_smooth(img, 0), img)


def test_smooth_constant_image():
    img = np.full((11, 13, 3), 77.0)
    np.testing.assert_allclose(gaussian_smooth(img, 0.8), img, atol=1e-12)


def test_smooth_ramp_matches_dense_convolution():
    # independent check: dense 1-D convolution with mirrored indices
    w, sigma = 25, 0.8
    ramp = np.tile(np.linspace(0, 255, w), (5, 1))[:, :, None]
    out = gaussian_smooth(ramp, sigma)[:, :, 0]
    radius = int(np.ceil(4 * sigma))
    taps = np.exp(-np.arange(-radius, radius + 1) ** 2 / (2 * sigma ** 2))
    taps /= taps.sum()

    def mirror(i):
        return -i - 1 if i < 0 else (2 * w - i - 1 if i >= w else i)

    expect = np.array([sum(t * ramp[0, mirror(x + o), 0] for o, t in zip(range(-radius, radius + 1), taps))
                       for x in range(w)])
    np.testing.assert_allclose(out, np.tile(expect, (5, 1)), atol=1e-9)
    assert out.min() >= ramp.min() and out.max() <= ramp.max()


# segment -----------------------------------------------------------------

def test_uniform_image_is_one_superpixel():
    sp = segment(np.full((10, 10, 3), 90, np.uint8), SegParams(k=200, min_size=100))
    assert sp.n_segments == 1
    assert sp.counts.tolist() == [100]
    assert sp.neighbors[0].size == 0
    np.testing.assert_allclose(sp.centroids[0], [4.5, 4.5])


def test_half_black_half_white():
    img = np.zeros((20, 20, 3), np.uint8)
    img[:, 10:] = 255
    sp = segment(img, SegParams(sigma=0, k=200, min_size=100))
    flood, n = oracles.color_components(img)
    assert sp.n_segments == n == 2
    assert sorted(sp.counts.tolist()) == [200, 200]
    # same partition as the flood-fill oracle, up to relabeling
    pairs = set(zip(sp.ids.ravel().tolist(), flood.ravel().tolist()))
    assert len(pairs) == 2
    assert 1 in sp.neighbors[0] and 0 in sp.neighbors[1]


def test_rejects_empty_image():
    with pytest.raises(InvalidInputError):
        segment(np.zeros((0, 4, 3)))


@pytest.mark.parametrize("idx", range(len(CORPUS)))
def test_segmentation_properties(idx):
    img = CORPUS[idx]
    params = SegParams(sigma=0.8, k=200, min_size=100)
    sp = segment(img, params)
    h, w = img.shape[:2]
    # partition
    assert sp.ids.shape == (h, w)
    assert sp.ids.min() == 0 and sp.ids.max() == sp.n_segments - 1
    assert sp.counts.sum() == h * w
    np.testing.assert_array_equal(sp.counts, np.bincount(sp.ids.ravel()))
    # min size
    assert sp.counts.min() >= min(100, h * w)
    # contiguity
    for s in range(sp.n_segments):
        assert oracles.is_4_connected(sp.ids == s)
    # determinism
    again = segment(img.copy(), params)
    np.testing.assert_array_equal(again.ids, sp.ids)


def test_adjacency_symmetric_irreflexive():
    for img in CORPUS[:10]:
        sp = segment(img)
        for j, nb in enumerate(sp.neighbors):
            assert j not in nb
            for q in nb:
                assert j in sp.neighbors[q]
        # neighbors are 4-adjacent pixels with different ids
        ids = sp.ids
        expect = set()
        for a, b in ((ids[:, :-1], ids[:, 1:]), (ids[:-1], ids[1:])):
            diff = a != b
            expect |= set(zip(a[diff].tolist(), b[diff].tolist()))
            expect |= set(zip(b[diff].tolist(), a[diff].tolist()))
        got = {(j, int(q)) for j, nb in enumerate(sp.neighbors) for q in nb}
        assert got == expect


K_SWEEP = (50, 100, 200, 400, 800, 3200)


def test_larger_k_never_increases_count():
    # threshold pass only: min_size=1 disables the small-segment merge
    for img in CORPUS:
        counts = [segment(img, SegParams(k=k, min_size=1)).n_segments for k in K_SWEEP]
        assert counts == sorted(counts, reverse=True), counts


@pytest.mark.xfail(strict=True, reason="small-segment merging is not monotone in k")
def test_larger_k_never_increases_count_with_min_size():
    for i, img in enumerate(CORPUS):
        counts = [segment(img, SegParams(k=k, min_size=100)).n_segments for k in K_SWEEP]
        assert counts == sorted(counts, reverse=True), (i, counts)


@settings(max_examples=30, deadline=None)
@given(h=st.integers(1, 15), w=st.integers(1, 15), seed=st.integers(0, 2**16),
       min_size=st.integers(1, 60))
def test_small_images_partition(h, w, seed, min_size):
    img = np.random.default_rng(seed).integers(0, 256, (h, w, 3))
    sp = segment(img, SegParams(sigma=0.5, k=100, min_size=min_size))
    assert sp.counts.sum() == h * w
    assert sp.counts.min() >= min(min_size, h * w)


# stats and io ------------------------------------------------------------

def test_stats_single_superpixel():
    counts, centroids, bboxes, neighbors = superpixel_stats(np.zeros((10, 10), np.int64))
    assert counts.tolist() == [100]
    np.testing.assert_allclose(centroids, [[4.5, 4.5]])
    assert bboxes.tolist() == [[0, 0, 9, 9]]
    assert neighbors[0].size == 0


def test_from_ids_stats():
    sp = SuperpixelMap.from_ids(np.array([[0, 0, 1], [2, 1, 1]]))
    assert sp.counts.tolist() == [2, 3, 1]
    assert sp.bboxes[1].tolist() == [0, 1, 1, 2]
    assert sp.neighbors[0].tolist() == [1, 2]
    with pytest.raises(InvalidInputError):
        SuperpixelMap.from_ids(np.array([[0, 2]]))


def test_segment_ids_follow_raster_order():
    sp = segment(CORPUS[5])
    _, first = np.unique(sp.ids.ravel(), return_index=True)
    assert np.all(np.diff(first) > 0)


def test_roundtrip(tmp_path):
    sp = segment(CORPUS[3])
    path = tmp_path / "sp.txt"
    write_superpixel_map(path, sp)
    assert path.read_text().splitlines()[0] == f"{sp.width} {sp.height} {sp.n_segments}"
    back = read_superpixel_map(path)
    np.testing.assert_array_equal(back.ids, sp.ids)
    np.testing.assert_allclose(back.centroids, sp.centroids)
