import numpy as np
import pytest

from screenlens.imaging import (
    BinaryImage,
    BoundingBox,
    GrayImage,
    RasterImage,
    SegmentationParams,
    binarize_inverse,
    connected_components,
    dilate,
    filter_innermost,
    otsu_threshold,
    scan_order,
    segment,
    to_grayscale,
)

from oracles import flood_fill_boxes, otsu_bruteforce


def rgb(arr):
    return RasterImage(np.asarray(arr, dtype=np.uint8))


def gray(arr):
    return GrayImage(np.asarray(arr, dtype=np.uint8))


def binary(arr):
    return BinaryImage(np.asarray(arr, dtype=np.uint8))


class TestTypes:
    def test_raster_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            RasterImage(np.zeros((4, 4), np.uint8))
        with pytest.raises(ValueError):
            RasterImage(np.zeros((0, 4, 3), np.uint8))

    def test_binary_rejects_intermediate_values(self):
        with pytest.raises(ValueError):
            BinaryImage(np.full((2, 2), 7, np.uint8))

    def test_box_invariants(self):
        with pytest.raises(ValueError):
            BoundingBox(0, 0, 0, 3)
        b = BoundingBox(1, 2, 3, 4)
        assert (b.x, b.y, b.w, b.h) == (1, 2, 3, 4)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            SegmentationParams(kernel_width=0)
        with pytest.raises(ValueError):
            SegmentationParams(iterations=-1)


class TestGrayscale:
    def test_white_stays_white(self):
        img = rgb(np.full((3, 3, 3), 255))
        assert (to_grayscale(img).pixels == 255).all()

    def test_black_stays_black(self):
        img = rgb(np.zeros((3, 3, 3)))
        assert (to_grayscale(img).pixels == 0).all()

    def test_pure_red_pixel(self):
        # round(0.299 * 255) = round(76.245) = 76
        img = rgb([[[255, 0, 0]]])
        assert to_grayscale(img).pixels[0, 0] == 76

    def test_rounds_half_up(self):
        # 0.299*1 + 0.587*0 + 0.114*background... pick channel values whose
        # luma lands exactly on .5: R=115, G=0, B=65 -> 34.385 + 7.41 = 41.795;
        # instead use G only: 0.587*3 = 1.761 -> 2; 0.299*5 = 1.495 -> 1
        img = rgb([[[5, 0, 0], [0, 3, 0]]])
        out = to_grayscale(img).pixels
        assert out[0, 0] == 1 and out[0, 1] == 2

    def test_dimensions_preserved(self):
        img = rgb(np.zeros((7, 5, 3)))
        g = to_grayscale(img)
        assert (g.height, g.width) == (7, 5)


class TestOtsu:
    def test_half_black_half_white_ties_to_zero(self):
        pix = np.zeros((2, 2), np.uint8)
        pix[:, 1] = 255
        assert otsu_threshold(gray(pix)) == 0

    def test_uniform_image_returns_its_intensity(self):
        assert otsu_threshold(gray(np.full((4, 4), 100))) == 100

    def test_random_image_matches_bruteforce(self):
        rng = np.random.default_rng(23)
        img = gray(rng.integers(0, 256, size=(16, 16)))
        assert otsu_threshold(img) == otsu_bruteforce(img.pixels)

    def test_many_random_images_match_bruteforce(self):
        rng = np.random.default_rng(29)
        for _ in range(40):
            img = gray(rng.integers(0, 256, size=(12, 12)))
            assert otsu_threshold(img) == otsu_bruteforce(img.pixels)

    def test_bimodal_image(self):
        rng = np.random.default_rng(31)
        lo = rng.normal(60, 8, size=200).clip(0, 255)
        hi = rng.normal(190, 8, size=312).clip(0, 255)
        img = gray(np.concatenate([lo, hi]).astype(np.uint8).reshape(16, 32))
        assert otsu_threshold(img) == otsu_bruteforce(img.pixels)


class TestBinarizeInverse:
    def test_all_zero_with_zero_threshold(self):
        out = binarize_inverse(gray(np.zeros((2, 3))), 0)
        assert (out.pixels == 255).all()

    def test_all_white_with_zero_threshold(self):
        out = binarize_inverse(gray(np.full((2, 3), 255)), 0)
        assert (out.pixels == 0).all()

    def test_split(self):
        out = binarize_inverse(gray([[10, 200]]), 100)
        assert out.pixels.tolist() == [[255, 0]]

    def test_rejects_out_of_range_threshold(self):
        with pytest.raises(ValueError):
            binarize_inverse(gray([[0]]), 256)

    def test_foreground_count_nondecreasing_in_threshold(self):
        rng = np.random.default_rng(37)
        img = gray(rng.integers(0, 256, size=(10, 10)))
        counts = [int((binarize_inverse(img, t).pixels == 255).sum()) for t in range(0, 256, 15)]
        assert counts == sorted(counts)


class TestDilate:
    def test_empty_image_unchanged(self):
        img = binary(np.zeros((5, 5)))
        assert not dilate(img, SegmentationParams(iterations=1)).pixels.any()

    def test_single_pixel_becomes_3x3_block(self):
        pix = np.zeros((11, 11), np.uint8)
        pix[5, 5] = 255
        out = dilate(binary(pix), SegmentationParams(iterations=1)).pixels
        want = np.zeros((11, 11), np.uint8)
        want[4:7, 4:7] = 255
        assert np.array_equal(out, want)

    def test_two_pixels_two_apart_merge(self):
        pix = np.zeros((5, 7), np.uint8)
        pix[2, 2] = pix[2, 4] = 255
        out = dilate(binary(pix), SegmentationParams(iterations=1)).pixels
        assert (out[2, 1:6] == 255).all()

    def test_never_removes_foreground(self):
        rng = np.random.default_rng(41)
        pix = ((rng.random((20, 20)) < 0.2) * 255).astype(np.uint8)
        out = dilate(binary(pix), SegmentationParams()).pixels
        assert ((pix == 255) <= (out == 255)).all()

    def test_zero_iterations_is_identity(self):
        pix = ((np.random.default_rng(2).random((8, 8)) < 0.5) * 255).astype(np.uint8)
        out = dilate(binary(pix), SegmentationParams(iterations=0))
        assert np.array_equal(out.pixels, pix)


class TestConnectedComponents:
    def test_all_background(self):
        assert connected_components(binary(np.zeros((4, 4)))) == []

    def test_filled_rectangle_is_its_own_box(self):
        pix = np.zeros((6, 8), np.uint8)
        pix[1:4, 2:6] = 255
        assert connected_components(binary(pix)) == [BoundingBox(2, 1, 4, 3)]

    def test_random_images_match_flood_fill(self):
        rng = np.random.default_rng(43)
        for _ in range(10):
            pix = ((rng.random((64, 64)) < 0.4) * 255).astype(np.uint8)
            got = {(b.x, b.y, b.w, b.h) for b in connected_components(binary(pix))}
            assert got == flood_fill_boxes(pix)


class TestFilterInnermost:
    params = SegmentationParams(min_area=0, min_width=0, min_height=0)

    def test_strict_containment_removed(self):
        boxes = [BoundingBox(0, 0, 10, 10), BoundingBox(2, 2, 3, 3)]
        assert filter_innermost(boxes, self.params) == [BoundingBox(0, 0, 10, 10)]

    def test_partial_overlap_retained(self):
        boxes = [BoundingBox(0, 0, 5, 5), BoundingBox(3, 3, 5, 5)]
        assert filter_innermost(boxes, self.params) == boxes

    def test_identical_boxes_keep_first(self):
        boxes = [BoundingBox(1, 1, 4, 4), BoundingBox(1, 1, 4, 4)]
        assert filter_innermost(boxes, self.params) == [BoundingBox(1, 1, 4, 4)]

    def test_size_minima(self):
        boxes = [BoundingBox(0, 0, 10, 10), BoundingBox(20, 20, 2, 2)]
        assert filter_innermost(boxes, SegmentationParams()) == [BoundingBox(0, 0, 10, 10)]

    def test_no_retained_box_contained_in_another(self):
        rng = np.random.default_rng(47)
        boxes = [
            BoundingBox(int(x), int(y), int(w), int(h))
            for x, y, w, h in zip(
                rng.integers(0, 30, 40),
                rng.integers(0, 30, 40),
                rng.integers(1, 12, 40),
                rng.integers(1, 12, 40),
            )
        ]
        kept = filter_innermost(boxes, self.params)
        for a in kept:
            for b in kept:
                assert a is b or not (a.contains(b) and a != b)


class TestScanOrder:
    def test_sorts_by_row_first(self):
        a = BoundingBox(5, 10, 2, 2)
        b = BoundingBox(0, 2, 2, 2)
        assert scan_order([a, b]) == [b, a]

    def test_ties_break_on_column(self):
        a = BoundingBox(8, 4, 2, 2)
        b = BoundingBox(3, 4, 2, 2)
        assert scan_order([a, b]) == [b, a]

    def test_stable_for_identical_boxes(self):
        a = BoundingBox(1, 1, 2, 2)
        b = BoundingBox(1, 1, 2, 2)
        out = scan_order([a, b])
        assert out[0] is a and out[1] is b

    def test_permutation_and_idempotent(self):
        rng = np.random.default_rng(53)
        boxes = [
            BoundingBox(int(x), int(y), int(w), int(h))
            for x, y, w, h in zip(
                rng.integers(0, 20, 25),
                rng.integers(0, 20, 25),
                rng.integers(1, 9, 25),
                rng.integers(1, 9, 25),
            )
        ]
        once = scan_order(boxes)
        assert sorted(map(id, once)) == sorted(map(id, boxes))
        assert scan_order(once) == once


class TestSegment:
    def test_blank_white_screenshot_yields_nothing(self):
        img = rgb(np.full((40, 40, 3), 255))
        assert segment(img) == []

    def test_two_separated_text_blocks(self):
        pix = np.full((40, 80, 3), 255, np.uint8)
        pix[10:20, 5:30] = 20   # left block
        pix[10:20, 45:70] = 20  # right block
        got = segment(rgb(pix))
        assert len(got) == 2
        (b1, c1), (b2, c2) = got
        assert b1.x < b2.x and b1.y == b2.y
        # crops come from the grayscale image at each box
        assert c1.pixels.shape == (b1.h, b1.w)
        # the oracle agrees on the dilated component count
        assert c2.pixels.shape == (b2.h, b2.w)

    def test_single_pixel_image(self):
        assert segment(rgb(np.zeros((1, 1, 3)))) == []

    def test_boxes_stay_in_bounds(self):
        rng = np.random.default_rng(59)
        pix = rng.integers(0, 256, size=(30, 50, 3)).astype(np.uint8)
        img = rgb(pix)
        for box, crop in segment(img, SegmentationParams(min_area=0, min_width=0, min_height=0)):
            assert box.x + box.w <= img.width
            assert box.y + box.h <= img.height
            assert crop.pixels.shape == (box.h, box.w)
