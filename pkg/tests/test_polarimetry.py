import numpy as np
import pytest

from tomocal.gauge import IllConditionedError
from tomocal.polarimetry import (PolarimeterTrace, StokesVector, coefficient_map, degree_landscape,
                                 degree_modulation, fourier_coefficients, polarimeter_reconstruct,
                                 polarimeter_trace)
from tomocal.qubit import I2, KET0, density_from_bloch, ketbra
from tomocal.probes import probe_set


def _jones_trace(rho, gamma, angles):
    """Independent Jones product: H polarizer after a plate at angle a."""
    out = []
    for a in angles:
        c, s = np.cos(a), np.sin(a)
        r = np.array([[c, -s], [s, c]])
        w = r @ np.diag([1, np.exp(-1j * gamma)]) @ r.T
        out.append(np.real((w @ rho @ w.conj().T)[0, 0]))
    return np.array(out)


def test_unpolarized_trace_is_flat():
    t = polarimeter_trace(I2 / 2, 0.0, 64, s0=2.0)
    assert np.allclose(t.intensities, 1.0)


def test_horizontal_trace_closed_form():
    t = polarimeter_trace(ketbra(KET0), 0.0, 8)
    a = t.angles
    assert np.allclose(t.intensities, 1 - np.sin(2 * a) ** 2 / 2, atol=1e-12)
    assert np.allclose(t.intensities, _jones_trace(ketbra(KET0), np.pi / 2, a), atol=1e-12)


def test_trace_matches_jones_for_random_states():
    rng = np.random.default_rng(3)
    for _ in range(5):
        v = rng.normal(size=3)
        rho = density_from_bloch(v / np.linalg.norm(v) * rng.uniform())
        g = np.pi / 2 + rng.normal(0, 0.1)
        t = polarimeter_trace(rho, g - np.pi / 2, 36)
        assert np.allclose(t.intensities, _jones_trace(rho, g, t.angles), atol=1e-12)


def test_aligned_plate_passes_horizontal():
    for dev in (0.0, 0.3, -0.5):
        assert polarimeter_trace(ketbra(KET0), dev, 16).intensities[0] == pytest.approx(1.0)


def test_trace_has_only_dc_2_4_harmonics():
    t = polarimeter_trace(density_from_bloch([0.3, -0.4, 0.5]), 0.1, 64)
    f = np.abs(np.fft.rfft(t.intensities))
    assert np.all(f[[1, 3, 5, 6, 7]] < 1e-10)


def test_reconstruct_examples():
    s = polarimeter_reconstruct(polarimeter_trace(ketbra(KET0)), 0.0).normalized()
    assert np.allclose(s.vector, [1, 1, 0, 0], atol=1e-9)
    assert s.degree == pytest.approx(1, abs=1e-9)
    s = polarimeter_reconstruct(polarimeter_trace(I2 / 2), 0.0)
    assert np.allclose(s.vector[1:], 0, atol=1e-12)
    assert s.degree == pytest.approx(0, abs=1e-12)
    s = polarimeter_reconstruct(polarimeter_trace(ketbra(KET0), np.radians(5)), 0.0)
    assert s.degree > 1


def test_reconstruct_roundtrip_random():
    rng = np.random.default_rng(8)
    for _ in range(100):
        v = rng.normal(size=3)
        v = v / np.linalg.norm(v) * (1.0 if rng.uniform() < 0.5 else rng.uniform())
        s0 = rng.uniform(0.5, 2.0)
        dev = rng.uniform(-0.3, 0.3)
        stokes = StokesVector(s0, v[2] * s0, v[0] * s0, v[1] * s0)
        got = polarimeter_reconstruct(polarimeter_trace(stokes, dev, 90), dev)
        assert np.linalg.norm(got.vector - stokes.vector) <= 1e-8 * np.linalg.norm(stokes.vector)


def test_stokes_density_roundtrip():
    rho = density_from_bloch([0.1, 0.2, 0.3])
    s = StokesVector.from_density(rho)
    assert np.allclose(s.vector, [1, 0.3, 0.1, 0.2])
    assert np.allclose(s.density(), rho)
    with pytest.raises(ValueError):
        StokesVector(0, 0, 0, 0).degree


def test_half_wave_assumption_is_ill_conditioned():
    t = polarimeter_trace(ketbra(KET0))
    with pytest.raises(IllConditionedError):
        polarimeter_reconstruct(t, np.pi / 2)
    assert np.linalg.cond(coefficient_map(0.0)) < 10


def test_trace_validation(tmp_path):
    with pytest.raises(ValueError):
        PolarimeterTrace(np.arange(4.0), np.ones(4))
    with pytest.raises(ValueError):
        PolarimeterTrace(np.linspace(0, 1, 10)[::-1], np.ones(10))
    with pytest.raises(ValueError):
        PolarimeterTrace(np.linspace(0, 1, 10), -np.ones(10))
    t = polarimeter_trace(ketbra(KET0), 0.0, 12)
    with pytest.raises(ValueError):
        fourier_coefficients(PolarimeterTrace(t.angles ** 1.1, t.intensities))
    path = tmp_path / "t.csv"
    t.to_csv(path)
    raw = path.read_bytes()
    assert raw.startswith(b"angle_rad,intensity\n") and b"\r" not in raw
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(rows[:, 1], t.intensities)


def test_degree_landscape_minimum_at_truth():
    traces = [polarimeter_trace(r, np.radians(5)) for r in probe_set("cube8").projectors()]
    grid = np.arange(0, 10.0001, 0.25)
    dd = degree_landscape(traces, np.radians(grid))
    assert grid[np.argmin(dd)] == pytest.approx(5.0)
    assert degree_modulation(traces, np.radians(5)) < 1e-9
