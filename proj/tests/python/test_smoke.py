import json
import math

import numpy as np
import pytest

import pml


@pytest.fixture(scope="module")
def koch2():
    return pml.Domain.koch(level=2)


@pytest.fixture(scope="module")
def field(koch2):
    return pml.Field.solve(koch2, p=2.0, h=0.03)


def test_domain(koch2):
    assert koch2.vertices.shape == (48, 2)
    assert len(koch2.hash) == 16
    assert koch2.contains(koch2.basepoint)
    assert not koch2.contains((5.0, 5.0))
    assert json.loads(koch2.to_json())["kind"] == "koch"


def test_bad_geometry_maps_to_exit_code_2():
    with pytest.raises(pml.GeometryError, match="self-intersection") as e:
        pml.Domain.polygon([(0, 0), (1, 1), (1, 0), (0, 1)])
    assert pml.EXIT_CODES[type(e.value)] == 2
    assert isinstance(e.value, pml.Error)


def test_p_out_of_range(koch2):
    with pytest.raises(pml.DomainError):
        pml.Field.solve(koch2, p=0.5, h=0.03)


def test_annulus_against_radial_solution():
    # p = 2: u = log(R/r)/log(R/r0), 1 on the inner circle and 0 at R.
    dom = pml.Domain.regular_ngon(256, radius=2.0, basepoint=(0.0, 0.0))
    f = pml.Field.solve(dom, p=2.0, h=0.04)
    r0 = dom.inner_radius
    for r in (1.2, 1.5, 1.8):
        u, _ = f.evaluate((r, 0.0))
        assert u == pytest.approx(math.log(2.0 / r) / math.log(2.0 / r0), abs=0.02)


def test_measure_and_dimension(field):
    mu = field.measure(4096)
    assert len(mu) == 4096
    assert np.all(mu.weights >= 0)
    assert mu.weights.sum() == pytest.approx(mu.total)
    assert field.level_flux(0.5) == pytest.approx(mu.total, rel=0.03)
    d = mu.dimension(samples=30, seed=7)
    assert 0.5 < d["weighted_median"] < 1.3
    assert d == mu.dimension(samples=30, seed=7)


def test_field_round_trip(field, tmp_path):
    path = str(tmp_path / "u.phf")
    field.save(path)
    g = pml.Field.load(path)
    assert g.hash == field.hash
    assert g.evaluate((0.5, 0.6))[0] == field.evaluate((0.5, 0.6))[0]


def test_halfplane_map(koch2):
    f = pml.HalfPlaneMap.build(koch2, 2048)
    assert f.accuracy < 1e-2
    z = f(0.3 + 0.8j)
    assert koch2.contains((z.real, z.imag))
    assert f.preimage(z) == pytest.approx(0.3 + 0.8j, abs=1e-6)
    k = f.koebe([0.0, 0.3 + 0.4j, -0.6j])
    assert k["pass"]
    c = f.cigar(1j, 0.2, 6)
    assert c["levels"] >= 3
    assert math.isfinite(c["cigar_constant"])


@pytest.mark.skipif(pml.run_cli is None, reason="built without the command line tool")
def test_run_cli(tmp_path):
    out = str(tmp_path / "dom.json")
    assert pml.run_cli(["domain", "--kind", "regular_ngon", "--n", "16", "--out", out]) == 0
    assert pml.Domain.load(out).vertices.shape == (16, 2)
    assert pml.run_cli(["solve", "--domain", str(tmp_path / "nope.json")]) == 1
