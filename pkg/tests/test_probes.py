import itertools

import numpy as np
import pytest

from tomocal.probes import (closest_probe, fibonacci_vectors, latlon_angles, mixed_probes,
                            parse_probe_spec, probe_set)
from tomocal.qubit import purity


def test_pauli6():
    got = {tuple(np.round(v, 12)) for v in probe_set("pauli6").bloch}
    want = {tuple(v) for v in np.vstack([np.eye(3), -np.eye(3)])}
    assert got == want


def _min_angle_deg(vecs):
    g = np.clip(vecs @ vecs.T, -1, 1)
    np.fill_diagonal(g, -1)
    return np.degrees(np.arccos(g.max()))


def test_fibonacci30_spacing():
    ps = probe_set("fibonacci", 30)
    assert len(ps) == 30
    assert _min_angle_deg(ps.bloch) > 20


def test_icosahedron_inner_products():
    v = probe_set("icosahedron12").bloch
    assert len(v) == 12
    allowed = np.array([1, -1, 1 / np.sqrt(5), -1 / np.sqrt(5)])
    for a, b in itertools.product(v, v):
        assert np.min(np.abs(allowed - a @ b)) < 1e-12


def test_cube8():
    v = probe_set("cube8").bloch
    assert np.allclose(np.abs(v), 1 / np.sqrt(3))
    assert len({tuple(np.sign(x)) for x in v}) == 8


@pytest.mark.parametrize("spec", ["pauli6", "cube8", "icosahedron12", "latlon14", "latlon22",
                                  "fibonacci30", "fibonacci108"])
def test_unit_norm_and_determinism(spec):
    a = parse_probe_spec(spec)
    b = parse_probe_spec(spec)
    assert np.allclose(np.linalg.norm(a.bloch, axis=1), 1, atol=1e-12)
    assert np.array_equal(a.bloch, b.bloch)
    assert np.allclose([s.bloch() for s in a.states], a.bloch, atol=1e-12)


@pytest.mark.parametrize("n", [30, 50, 108, 500])
def test_fibonacci_balance(n):
    assert np.linalg.norm(fibonacci_vectors(n).mean(axis=0)) < 0.05


def test_latlon_layout():
    a14 = latlon_angles(14)
    assert len(a14) == 14
    assert a14[0, 0] == 0 and a14[-1, 0] == pytest.approx(np.pi)
    assert sorted(set(np.round(a14[1:-1, 0], 12))) == pytest.approx(
        [np.pi / 4, np.pi / 2, 3 * np.pi / 4])
    assert len(latlon_angles(22)) == 22
    assert len(set(np.round(latlon_angles(22)[1:-1, 0], 12))) == 4


def test_bad_specs():
    for spec in ("fibonacci", "latlon1", "dodecahedron", "cube9"):
        with pytest.raises(ValueError):
            parse_probe_spec(spec)
    with pytest.raises(ValueError):
        probe_set("fibonacci")


def test_mixed_probes_equal_purity():
    rhos = mixed_probes(probe_set("cube8"), 0.8)
    assert np.allclose([purity(r) for r in rhos], 0.8)
    with pytest.raises(ValueError):
        mixed_probes(probe_set("cube8"), 0.3)


def test_closest_probe_and_roundtrip():
    ps = parse_probe_spec("latlon22")
    i = closest_probe(ps, np.pi / 2, 0.0)
    assert np.degrees(ps.angles[i, 1]) == pytest.approx(0.0)
    back = type(ps).from_dict(ps.to_dict())
    assert np.allclose(back.bloch, ps.bloch)
