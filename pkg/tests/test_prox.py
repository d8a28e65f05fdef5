import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from p2d2.errors import InvalidParameter
from p2d2.prox import RegularizerSpec, prox, subgradient_witness, value

SPECS = [
    RegularizerSpec("zero"),
    RegularizerSpec("l1", 0.7),
    RegularizerSpec("elastic_net", 0.5, 0.8),
    RegularizerSpec("nonneg_indicator"),
]
MUS = np.logspace(-3, 2, 6)


def numeric_prox_coordinate(spec, z, mu):
    """Brute-force 1-D minimization of R(v) + (v - z)^2 / (2 mu)."""
    if spec.kind == "nonneg_indicator":
        res = minimize_scalar(lambda v: (v - z) ** 2 / (2 * mu), bounds=(0, abs(z) + 10), method="bounded",
                              options={"xatol": 1e-12})
        return res.x
    f = lambda v: value(spec, np.array([v])) + (v - z) ** 2 / (2 * mu)
    res = minimize_scalar(f, bounds=(-abs(z) - 10, abs(z) + 10), method="bounded", options={"xatol": 1e-12})
    return res.x


def test_l1_example_against_numeric_oracle():
    spec, z, mu = RegularizerSpec("l1", 1.0), np.array([1.0, -0.2, 0.0]), 0.3
    oracle = np.array([numeric_prox_coordinate(spec, zi, mu) for zi in z])
    np.testing.assert_allclose(oracle, [0.7, 0.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(prox(spec, z, mu), [0.7, 0.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_closed_form_matches_numeric_oracle(spec, rng):
    for mu in (0.1, 1.0, 3.0):
        z = rng.standard_normal(10) * 2
        oracle = np.array([numeric_prox_coordinate(spec, zi, mu) for zi in z])
        np.testing.assert_allclose(prox(spec, z, mu), oracle, atol=1e-6)


def test_trivial_kinds(rng):
    z = rng.standard_normal(5)
    np.testing.assert_array_equal(prox(RegularizerSpec("zero"), z, 3.0), z)
    np.testing.assert_array_equal(prox(RegularizerSpec("nonneg_indicator"), np.array([-1.0, 2.0]), 0.1), [0, 2])


def test_invalid_mu():
    with pytest.raises(InvalidParameter):
        prox(RegularizerSpec("l1", 1.0), np.ones(2), 0.0)
    with pytest.raises(InvalidParameter):
        RegularizerSpec("l1", -1.0)
    with pytest.raises(InvalidParameter):
        RegularizerSpec("group_lasso")


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_nonexpansive(spec, rng):
    for mu in MUS:
        a = rng.standard_normal((1000, 6)) * 3
        b = rng.standard_normal((1000, 6)) * 3
        lhs = np.linalg.norm(prox(spec, a, mu) - prox(spec, b, mu), axis=1)
        assert np.all(lhs <= np.linalg.norm(a - b, axis=1) + 1e-12)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_first_order_minimality(spec, rng):
    for mu in MUS:
        for _ in range(50):
            z = rng.standard_normal(6) * 2
            p = prox(spec, z, mu)
            d = rng.standard_normal(6)
            d /= np.linalg.norm(d)
            obj = lambda v: value(spec, v) + np.sum((v - z) ** 2) / (2 * mu)
            assert obj(p) <= obj(p + 1e-4 * d) + 1e-15


def test_projection_idempotent(rng):
    spec = RegularizerSpec("nonneg_indicator")
    z = rng.standard_normal((20, 4))
    np.testing.assert_array_equal(prox(spec, prox(spec, z, 1.0), 1.0), prox(spec, z, 1.0))


def test_subgradient_witness_examples():
    z = np.array([1.0])
    assert subgradient_witness(RegularizerSpec("zero"), z, z, 1.0) == 0.0
    l1 = RegularizerSpec("l1", 1.0)
    assert subgradient_witness(l1, np.array([0.7]), z, 0.3) == pytest.approx(0.0, abs=1e-14)
    assert subgradient_witness(l1, np.array([0.9]), z, 0.3) == pytest.approx(2 / 3, abs=1e-12)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_subgradient_witness_zero_at_prox(spec, rng):
    for mu in MUS:
        z = rng.standard_normal(8) * 2
        assert subgradient_witness(spec, prox(spec, z, mu), z, mu) < 1e-9 * max(1, 1 / mu)
        # perturbing a nonzero coordinate breaks optimality
        w = prox(spec, z, mu) + 0.1
        assert subgradient_witness(spec, w, z, mu) > 0


def test_spec_dict_roundtrip():
    for spec in SPECS:
        assert RegularizerSpec.from_dict(spec.to_dict()) == spec
