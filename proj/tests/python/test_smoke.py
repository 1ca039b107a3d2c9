"""Smoke tests for the Python bindings: every exposed operation runs and
returns sane shapes/values. Assert-based so the file needs no test runner."""

import os
import tempfile

import numpy as np

import parlens


def test_psf_synthesis():
    psf = parlens.synth_diffuser_psf((9, 9), 12, 1.2, 3)
    assert psf.shape == (9, 9)
    assert abs(psf.sum() - 1.0) < 1e-9
    assert psf.min() >= 0.0
    again = parlens.synth_diffuser_psf((9, 9), 12, 1.2, 3)
    assert np.array_equal(psf, again), "synthesis must be seed-deterministic"
    lenslet = parlens.synth_lenslet_psf((9, 9), 4, 0.6, 3)
    assert lenslet.max() > psf.max(), "lenslet PSFs concentrate energy"


def test_forward_and_reconstruct():
    rng = np.random.default_rng(7)
    scene = rng.uniform(0.1, 0.9, size=(12, 12))
    psf = parlens.synth_diffuser_psf((5, 5), 6, 0.8, 1)

    measurement = parlens.forward(scene, psf)
    assert measurement.shape == scene.shape

    estimate, history = parlens.reconstruct(measurement, psf, scene.shape, iterations=150)
    assert estimate.shape == scene.shape
    assert estimate.min() >= 0.0
    assert len(history) == 150
    assert history[-1] <= history[0], "objective must not increase"

    full = parlens.convolve(scene, psf)
    assert full.shape == (16, 16), "linear convolution grows by psf - 1"


def test_autocorrelation_metrics():
    delta = np.zeros((11, 11))
    delta[5, 5] = 1.0
    ac = parlens.autocorrelate(delta)
    assert ac.shape == (21, 21)
    assert abs(ac[10, 10] - 1.0) < 1e-12
    profile = parlens.psf_profile(delta)
    assert profile["fwhm_defined"]
    assert profile["fwhm"] <= 2.0
    assert profile["peak_sidelobe_ratio"] < 0.02


def test_homography_estimate_and_warp():
    h_true = np.array([[1.0, 0.02, 3.0], [-0.01, 1.0, -2.0], [1e-5, 0.0, 1.0]])
    src = np.array([[x, y] for x in (0.0, 10, 20, 30) for y in (0.0, 10, 20, 30)])
    ones = np.hstack([src, np.ones((len(src), 1))])
    proj = ones @ h_true.T
    dst = proj[:, :2] / proj[:, 2:]

    h = parlens.estimate_homography(src, dst)
    h = h / h[2, 2]
    assert np.allclose(h, h_true / h_true[2, 2], atol=1e-9)

    img = np.tile(np.linspace(0.0, 1.0, 32), (32, 1))
    identity = np.eye(3)
    warped = parlens.warp(img, identity, img.shape)
    assert np.allclose(warped, img, atol=1e-12)


def test_distortion_round_trip():
    normalized = np.array([[0.1, -0.2], [0.35, 0.2], [-0.4, 0.3], [0.0, 0.0]])
    kwargs = dict(fx=150.0, fy=140.0, cx=96.0, cy=80.0, k1=0.05, k2=-0.01)
    pixels = parlens.distort_points(normalized, **kwargs)
    assert not np.allclose(pixels[:, 0], normalized[:, 0])
    back = parlens.undistort_points(pixels, **kwargs)
    assert np.allclose(back, normalized, atol=1e-7)


def test_image_io_round_trip():
    rng = np.random.default_rng(3)
    img = rng.uniform(0.0, 1.0, size=(7, 9)).astype(np.float64)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "img.pfm")
        parlens.save_image(img, path, "pfm")
        back = parlens.load_image(path)
        assert back.shape == img.shape
        assert np.allclose(back, img, atol=1e-6), "PFM stores float32"


def test_errors_are_typed():
    try:
        parlens.load_image("/definitely/not/a/file.pfm")
    except parlens.PipelineError:
        pass
    else:
        raise AssertionError("expected PipelineError for a missing file")


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"ok {test.__name__}")
    print(f"{len(tests)} python smoke tests passed")


if __name__ == "__main__":
    main()
