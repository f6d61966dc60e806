import dataclasses
import os

import numpy as np
import pytest
from scipy import ndimage

from ear_sift import (
    ConfigError,
    GrayImage,
    ImageTooSmall,
    Keypoint,
    Mask,
    SiftParams,
    assign_orientation,
    build_scale_space,
    clamp_descriptor,
    compute_descriptor,
    detect_extrema,
    extract_sift,
    localize_keypoint,
    restrict_keypoints,
    write_keypoint_dump,
)
from ear_sift.sift_utils import (
    EDGE_RESPONSE,
    LOW_CONTRAST,
    Candidate,
    Rejection,
    ScaleSpace,
    base_blur,
    gaussian_kernel1d,
    increment_sigmas,
    keypoint_at,
    keypoint_pixel,
)

# Define a test folder to isolate test artifacts
TEST_FOLDER = os.path.join(os.getcwd(), "ear_sift_test_folder_sift")
os.makedirs(TEST_FOLDER, exist_ok=True)

NO_UPSAMPLE = SiftParams(initial_upsample=False)


@pytest.fixture(scope="module", autouse=True)
def setup_teardown():
    """
    Fixture to handle setup and teardown for all tests.

    - Cleans up all files and folders in `TEST_FOLDER` after tests complete.
    """
    yield
    for root, dirs, files in os.walk(TEST_FOLDER, topdown=False):
        for file in files:
            os.remove(os.path.join(root, file))
        for d in dirs:
            os.rmdir(os.path.join(root, d))
    os.rmdir(TEST_FOLDER)


def _texture(size: int, seed: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    noise = ndimage.gaussian_filter(np.random.default_rng(seed).standard_normal((size, size)), 2.0)
    noise = (noise - noise.min()) / (noise.max() - noise.min())
    return low + (high - low) * noise


def _blob(size: int, cx: float, cy: float, sigma: float = 4.0, amplitude: float = 0.8) -> GrayImage:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    return GrayImage(0.1 + amplitude * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma ** 2)))


def _quadratic_space(amplitude: float, curvatures=(1.0, 1.0, 1.0), shift=(0.0, 0.0, 0.0)) -> ScaleSpace:
    """A single-octave DoG stack D = amplitude (1 - sum c (q - q0)^2) peaking near (x=4, y=4, level=2)."""
    level, y, x = np.mgrid[0:5, 0:9, 0:9].astype(np.float64)
    cx, cy, cs = curvatures
    sx, sy, ss = shift
    dog = amplitude * (1.0 - cx * (x - 4 - sx) ** 2 - cy * (y - 4 - sy) ** 2 - cs * (level - 2 - ss) ** 2)
    return ScaleSpace((), (dog,), False, 9, 9, NO_UPSAMPLE)


def _ramp_space(angle: float, size: int = 41) -> ScaleSpace:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    ramp = 0.5 + 0.01 * (np.cos(angle) * (xx - size // 2) + np.sin(angle) * (yy - size // 2))
    return ScaleSpace((np.stack([ramp] * 6),), (), False, size, size, NO_UPSAMPLE)


def _central_keypoint(space: ScaleSpace, x: float, y: float, level: int = 1) -> Keypoint:
    return keypoint_at(space, 0, level, x, y)


def test_params_validation():
    """
    Test that invalid SIFT parameters raise ConfigError.
    """
    assert SiftParams().descriptor_length == 128
    with pytest.raises(ConfigError):
        SiftParams(scales_per_octave=1)
    with pytest.raises(ConfigError):
        SiftParams(descriptor_width=3)


def test_scale_space_impulse():
    """
    Test `build_scale_space` against chained 1-d kernels on an impulse.

    - Every Gaussian level of the first octave equals the outer product of
      the successive kernels (no border effect for a centered impulse).
    """
    size = 129
    data = np.zeros((size, size))
    data[64, 64] = 1.0
    space = build_scale_space(GrayImage(data), NO_UPSAMPLE)

    kernel = gaussian_kernel1d(base_blur(NO_UPSAMPLE))
    increments = increment_sigmas(NO_UPSAMPLE)
    for level in range(NO_UPSAMPLE.scales_per_octave + 3):
        if level > 0:
            kernel = np.convolve(kernel, gaussian_kernel1d(increments[level]))
        radius = len(kernel) // 2
        expected = np.zeros((size, size))
        expected[64 - radius:65 + radius, 64 - radius:65 + radius] = np.outer(kernel, kernel)
        assert np.allclose(space.gaussians[0][level], expected, atol=1e-12)
    assert np.allclose(space.dogs[0], space.gaussians[0][1:] - space.gaussians[0][:-1])


def test_scale_space_shapes():
    """
    Test the octave layout of an upsampled 128 x 64 image.

    - Octave o of the doubled input is (128 >> o) x (256 >> o), with s + 3
      Gaussian and s + 2 DoG levels.
    - Inputs below 16 pixels after upsampling are refused.
    """
    space = build_scale_space(GrayImage(np.full((64, 128), 0.5)))
    assert len(space.gaussians) == 5
    for o, (gaussians, dogs) in enumerate(zip(space.gaussians, space.dogs)):
        assert gaussians.shape == (6, 128 >> o, 256 >> o)
        assert dogs.shape == (5, 128 >> o, 256 >> o)

    with pytest.raises(ImageTooSmall):
        build_scale_space(GrayImage(np.full((7, 7), 0.5)))


def test_constant_image():
    """
    Test that a constant image yields no keypoint.
    """
    assert extract_sift(GrayImage(np.full((64, 64), 0.5))) == []


def test_blob_candidate():
    """
    Test `detect_extrema` on a Gaussian blob of sigma 4.

    - A candidate lies within 2 pixels of the blob center.
    - The negated image yields the same candidate positions.
    """
    img = _blob(64, 32.0, 32.0)
    space = build_scale_space(img)
    candidates = detect_extrema(space)
    positions = [(c.x * 2.0 ** c.octave / 2.0, c.y * 2.0 ** c.octave / 2.0) for c in candidates]
    assert any(np.hypot(x - 32.0, y - 32.0) <= 2.0 for x, y in positions)

    texture = GrayImage(_texture(64, seed=1))
    negated = GrayImage(1.0 - texture.data)
    direct = {(c.octave, c.level, c.y, c.x) for c in detect_extrema(build_scale_space(texture))}
    flipped = {(c.octave, c.level, c.y, c.x) for c in detect_extrema(build_scale_space(negated))}
    assert direct and direct == flipped


def test_localize_quadratic():
    """
    Test `localize_keypoint` on analytic DoG cubes.

    - A quadratic peak shifted by (0.3, -0.2, 0.1) is recovered exactly.
    - A weak peak is rejected for low contrast.
    - A ridge (curvature ratio 100) is rejected as an edge response.
    """
    candidate = Candidate(octave=0, level=2, y=4, x=4)
    space = _quadratic_space(1.0, shift=(0.3, -0.2, 0.1))
    kp = localize_keypoint(candidate, space, NO_UPSAMPLE)
    assert isinstance(kp, Keypoint)
    assert kp.x_octave == pytest.approx(4.3)
    assert kp.y_octave == pytest.approx(3.8)
    assert kp.sigma_octave == pytest.approx(1.6 * 2.0 ** (2.1 / 3.0))
    assert kp.response == pytest.approx(1.0)
    assert (kp.x, kp.y) == (pytest.approx(4.3), pytest.approx(3.8))

    weak = localize_keypoint(candidate, _quadratic_space(0.005), NO_UPSAMPLE)
    assert isinstance(weak, Rejection) and weak.reason == LOW_CONTRAST

    ridge = localize_keypoint(candidate, _quadratic_space(1.0, curvatures=(1.0, 0.01, 1.0)), NO_UPSAMPLE)
    assert isinstance(ridge, Rejection) and ridge.reason == EDGE_RESPONSE


def test_blob_subpixel():
    """
    Test that a blob centered at (32.4, 31.7) is located within half a pixel.
    """
    keypoints = extract_sift(_blob(64, 32.4, 31.7))
    assert keypoints
    distances = [np.hypot(kp.x - 32.4, kp.y - 31.7) for kp in keypoints]
    assert min(distances) < 0.5

    assert extract_sift(_blob(64, 32.4, 31.7, amplitude=0.01)) == []


def test_assign_orientation():
    """
    Test the `assign_orientation` function.

    - A ramp at 0 and at 30 degrees gives one keypoint at that angle.
    - The roof min(x, y) gives two peaks, at 0 and 90 degrees.
    """
    for degrees in (0.0, 30.0):
        space = _ramp_space(np.deg2rad(degrees))
        oriented = assign_orientation(_central_keypoint(space, 20.0, 20.0), space, NO_UPSAMPLE)
        assert len(oriented) == 1
        assert oriented[0].orientation == pytest.approx(np.deg2rad(degrees), abs=1e-6)

    yy, xx = np.mgrid[0:41, 0:41].astype(np.float64)
    roof = 0.2 + 0.01 * np.minimum(xx, yy)
    space = ScaleSpace((np.stack([roof] * 6),), (), False, 41, 41, NO_UPSAMPLE)
    oriented = assign_orientation(_central_keypoint(space, 20.0, 20.0), space, NO_UPSAMPLE)
    angles = sorted(kp.orientation for kp in oriented)
    assert angles == [pytest.approx(0.0, abs=1e-6), pytest.approx(np.pi / 2.0, abs=1e-6)]


def test_descriptor_rotation_and_brightness():
    """
    Test the invariances of `compute_descriptor`.

    - Rotating the image by 90 degrees and the orientation by -90 degrees
      gives the same descriptor.
    - Scaling intensities by 1.1 leaves the descriptor unchanged.
    """
    size = 65
    data = _texture(size, seed=4, high=0.85)
    space = build_scale_space(GrayImage(data), NO_UPSAMPLE)
    rotated = build_scale_space(GrayImage(np.rot90(data)), NO_UPSAMPLE)

    theta = 0.7
    kp = keypoint_at(space, 0, 1, 30.0, 34.0)
    kp_rot = keypoint_at(rotated, 0, 1, 34.0, size - 1 - 30.0)
    a = compute_descriptor(dataclasses.replace(kp, orientation=theta), space, NO_UPSAMPLE)
    b = compute_descriptor(
        dataclasses.replace(kp_rot, orientation=float(np.mod(theta - np.pi / 2.0, 2.0 * np.pi))),
        rotated,
        NO_UPSAMPLE,
    )
    assert np.linalg.norm(a) == pytest.approx(1.0)
    assert np.linalg.norm(a - b) < 0.3

    brighter = build_scale_space(GrayImage(1.1 * data), NO_UPSAMPLE)
    c = compute_descriptor(dataclasses.replace(kp, orientation=theta), brighter, NO_UPSAMPLE)
    assert np.allclose(a, c, atol=1e-9)


def test_clamp_descriptor():
    """
    Test the `clamp_descriptor` function.

    - The result matches repeated clamping and renormalization run to
      convergence.
    - No entry exceeds the clamp and the norm is 1.
    - Every keypoint extracted from a texture honors the clamp.
    """
    rng = np.random.default_rng(11)
    for _ in range(20):
        histogram = rng.exponential(size=128) ** 4
        clamped = clamp_descriptor(histogram, 0.2)
        assert clamped.max() <= 0.2 + 1e-12
        assert np.linalg.norm(clamped) == pytest.approx(1.0, abs=1e-12)

        iterated = histogram / np.linalg.norm(histogram)
        for _ in range(5000):
            iterated = np.minimum(iterated, 0.2)
            iterated = iterated / np.linalg.norm(iterated)
        assert np.allclose(clamped, iterated, atol=1e-6)

    spiky = np.zeros(128)
    spiky[:4] = [10.0, 5.0, 1.0, 0.5]
    assert np.allclose(clamp_descriptor(spiky, 0.2)[:4], 0.5)

    for kp in extract_sift(GrayImage(_texture(96, seed=2)), params=NO_UPSAMPLE):
        assert kp.descriptor.max() <= 0.2 + 1e-12
        assert np.linalg.norm(kp.descriptor) == pytest.approx(1.0)


def test_extract_sift_properties():
    """
    Test the `extract_sift` function on a smooth random texture.

    - Descriptors have 128 values of unit norm.
    - Raising the contrast threshold never adds keypoints.
    - A mask restricts keypoints to its rounded locations.
    """
    img = GrayImage(_texture(96, seed=2))
    keypoints = extract_sift(img)
    assert len(keypoints) > 10
    for kp in keypoints:
        assert kp.descriptor.shape == (128,)
        assert np.linalg.norm(kp.descriptor) == pytest.approx(1.0)
        assert 0.0 <= kp.orientation < 2.0 * np.pi

    counts = [len(extract_sift(img, params=SiftParams(contrast_threshold=t))) for t in (0.01, 0.03, 0.08)]
    assert counts[0] >= counts[1] >= counts[2]

    bits = np.zeros((96, 96), dtype=bool)
    bits[:, :48] = True
    restricted = extract_sift(img, keep_mask=Mask(bits))
    expected = restrict_keypoints(keypoints, Mask(bits))
    assert len(restricted) == len(expected)
    assert all(a.same_as(b) for a, b in zip(restricted, expected))
    assert all(int(np.floor(kp.x + 0.5)) < 48 for kp in restricted)


def test_extract_sift_matches_stages():
    """
    Test that `extract_sift` reports the oriented keypoints of its stages.

    - Running detection, localization, orientation and description by hand
      gives the same keypoints in the same order.
    - Only candidates localized to the very same keypoint are merged.
    """
    img = GrayImage(_texture(64, seed=8))
    space = build_scale_space(img, NO_UPSAMPLE)
    expected = []
    for candidate in detect_extrema(space, NO_UPSAMPLE):
        located = localize_keypoint(candidate, space, NO_UPSAMPLE)
        if isinstance(located, Rejection):
            continue
        for oriented in assign_orientation(located, space, NO_UPSAMPLE):
            descriptor = compute_descriptor(oriented, space, NO_UPSAMPLE)
            x, y = keypoint_pixel(oriented)
            if descriptor.any() and 0 <= x < 64 and 0 <= y < 64:
                expected.append(dataclasses.replace(oriented, descriptor=descriptor))

    def key(kp):
        return kp.octave, kp.level, kp.y_octave, kp.x_octave, kp.orientation

    expected.sort(key=key)
    expected = [kp for i, kp in enumerate(expected) if i == 0 or key(kp) != key(expected[i - 1])]

    keypoints = extract_sift(img, params=NO_UPSAMPLE)
    assert len(keypoints) == len(expected) > 0
    assert all(a.same_as(b) for a, b in zip(keypoints, expected))


def test_translation_repeatability():
    """
    Test that shifting the content by (8, 8) pixels moves the keypoints.

    - At least 70% of central keypoints reappear within 1 pixel of the
      shifted location.
    """
    big = _texture(136, seed=5)
    first = extract_sift(GrayImage(big[:128, :128]))
    second = extract_sift(GrayImage(big[8:136, 8:136]))
    central = [kp for kp in first if 32 <= kp.x <= 96 and 32 <= kp.y <= 96]
    assert len(central) >= 10
    found = sum(
        any(
            abs(other.x - (kp.x - 8.0)) <= 1.0
            and abs(other.y - (kp.y - 8.0)) <= 1.0
            and abs(other.scale / kp.scale - 1.0) < 0.1
            for other in second
        )
        for kp in central
    )
    assert found / len(central) >= 0.7


def test_rotation_repeatability():
    """
    Test that a 10 degree rotation keeps at least half of the central
    keypoints.
    """
    size = 128
    data = _texture(size, seed=6, low=0.1, high=0.9)
    angle = np.deg2rad(10.0)
    rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    center = np.array([(size - 1) / 2.0, (size - 1) / 2.0])
    rotated = ndimage.affine_transform(data, rotation, offset=center - rotation @ center, order=3, mode="reflect")

    first = extract_sift(GrayImage(data))
    second = extract_sift(GrayImage(np.clip(rotated, 0.0, 1.0)))
    central = [kp for kp in first if np.hypot(kp.x - center[1], kp.y - center[0]) <= 32.0]
    assert len(central) >= 5
    found = 0
    for kp in central:
        # output (row, col) = R^T (input - c) + c
        row, col = rotation.T @ (np.array([kp.y, kp.x]) - center) + center
        found += any(
            np.hypot(other.x - col, other.y - row) <= 2.0 and 0.8 <= other.scale / kp.scale <= 1.25
            for other in second
        )
    assert found / len(central) >= 0.5


def test_keypoint_dump():
    """
    Test the `write_keypoint_dump` function.

    - One line per keypoint with x, y, scale, orientation and 128 values.
    """
    keypoints = extract_sift(GrayImage(_texture(64, seed=3)))
    path = os.path.join(TEST_FOLDER, "dump", "keypoints.txt")
    write_keypoint_dump(keypoints, path)
    with open(path, "rt") as fin:
        lines = fin.read().splitlines()
    assert len(lines) == len(keypoints)
    for line, kp in zip(lines, keypoints):
        values = [float(v) for v in line.split()]
        assert len(values) == 132
        assert values[:4] == [kp.x, kp.y, kp.scale, kp.orientation]
        assert kp.same_as(kp)
