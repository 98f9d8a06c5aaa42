import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ALL_VARIANTS
from epidde.compartments import (
    VARIANTS,
    CompartmentState,
    RateParameters,
    default_parameters,
    get_variant,
    initial_state,
    model_observables,
    rhs,
    rhs_vjp,
    vector_field,
)
from epidde.errors import InfeasibleInitializationError, StructuralError
import oracles


def sird(beta=0.5, delta=0.1, eps=0.05, n=1000.0):
    return RateParameters.for_variant("SIRD", n, beta_star=beta, delta=delta, epsilon=eps)


def test_sird_field_example():
    dz = vector_field("SIRD", CompartmentState([990, 10, 0, 0]), sird(), 0.5)
    np.testing.assert_allclose(dz, [-4.95, 3.45, 1.0, 0.5], rtol=0, atol=1e-12)


def test_sird_field_matches_scalar_oracle(rng):
    for _ in range(20):
        z = rng.uniform(0, 500, 4)
        b, d, e = rng.uniform(0, 1, 3)
        dz = vector_field("SIRD", CompartmentState(z), sird(b, d, e, 2000.0), b)
        np.testing.assert_allclose(dz, oracles.sird_rhs(*z, b, d, e, 2000.0), rtol=1e-14, atol=1e-12)


def test_known_variants():
    assert set(VARIANTS) == {"SIR", "SEIR", "SIRD", "SEIRD", "SMCRD", "SEMCRD"}
    assert get_variant("semcrd").labels == ("S", "E", "M", "C", "R", "D")
    with pytest.raises(StructuralError):
        get_variant("SIS")


def test_dimension_mismatch_is_structural():
    with pytest.raises(StructuralError):
        vector_field("SEIRD", CompartmentState([990, 10, 0, 0]), sird(), 0.5)


def test_rate_set_must_match_variant():
    with pytest.raises(StructuralError):
        RateParameters.for_variant("SIRD", 1000, beta_star=0.3, delta=0.1)
    with pytest.raises(StructuralError):
        RateParameters.for_variant("SIR", 1000, beta_star=0.3, delta=0.1, epsilon=0.1)


def test_rates_outside_unit_interval_rejected():
    with pytest.raises(ValueError):
        RateParameters.for_variant("SIR", 1000, beta_star=1.5, delta=0.1)


def test_negative_state_rejected():
    with pytest.raises(ValueError):
        CompartmentState([990, -1, 0, 0])


@pytest.mark.parametrize("variant", ALL_VARIANTS, ids=str)
def test_zero_rates_give_zero_field(variant):
    params = RateParameters.for_variant(variant, 100, **dict.fromkeys(variant.active_rates, 0.0))
    z = np.linspace(1, 10, variant.dim)
    assert np.all(vector_field(variant, CompartmentState(z), params, 0.0) == 0)


rate = st.floats(0.0, 1.0)


@given(st.sampled_from(ALL_VARIANTS), st.data())
def test_field_conserves_population(variant, data):
    z = np.array(data.draw(st.lists(st.floats(0, 1e7), min_size=variant.dim, max_size=variant.dim)))
    n = max(z.sum(), 1.0)
    rates = {k: data.draw(rate) for k in variant.active_rates}
    params = RateParameters.for_variant(variant, n, **rates)
    dz = vector_field(variant, CompartmentState(z), params, data.draw(rate))
    assert abs(dz.sum()) <= 1e-9 * max(np.abs(dz).sum(), 1e-300)


@given(st.sampled_from(ALL_VARIANTS), st.data(), st.floats(0.1, 10.0))
def test_field_homogeneous_in_state_and_population(variant, data, scale):
    z = np.array(data.draw(st.lists(st.floats(0, 1e4), min_size=variant.dim, max_size=variant.dim)))
    n = max(z.sum(), 1.0)
    rates = {k: data.draw(rate) for k in variant.active_rates}
    beta = data.draw(rate)
    a = vector_field(variant, CompartmentState(z), RateParameters.for_variant(variant, n, **rates), beta)
    b = vector_field(variant, CompartmentState(z * scale), RateParameters.for_variant(variant, n * scale, **rates), beta)
    np.testing.assert_allclose(b, a * scale, rtol=1e-9, atol=1e-9)


@given(st.sampled_from(ALL_VARIANTS), st.data())
def test_susceptibles_only_leave_through_infection(variant, data):
    z = np.array(data.draw(st.lists(st.floats(0, 1e4), min_size=variant.dim, max_size=variant.dim)))
    rates = {k: data.draw(rate) for k in variant.active_rates}
    params = RateParameters.for_variant(variant, max(z.sum(), 1.0), **rates)
    dz = vector_field(variant, CompartmentState(z), params, 0.0)
    assert dz[0] == 0
    dz = vector_field(variant, CompartmentState(z), params, data.draw(rate))
    assert dz[0] <= 0


@pytest.mark.parametrize("variant", ALL_VARIANTS, ids=str)
def test_rhs_vjp_matches_finite_differences(variant, rng):
    z = rng.uniform(10, 300, variant.dim)
    rates = rng.uniform(0.05, 0.5, len(variant.rates))
    beta, n, adj = 0.4, z.sum(), rng.normal(size=variant.dim)
    gz, grates, gbeta = rhs_vjp(variant, z, rates, beta, n, adj)

    def f(z_, r_, b_):
        return adj @ rhs(variant, z_, r_, b_, n)

    h = 1e-6
    for k in range(variant.dim):
        e = np.zeros(variant.dim)
        e[k] = h
        assert gz[k] == pytest.approx((f(z + e, rates, beta) - f(z - e, rates, beta)) / (2 * h), rel=1e-6, abs=1e-8)
    for k in range(len(rates)):
        e = np.zeros(len(rates))
        e[k] = h
        assert grates[k] == pytest.approx((f(z, rates + e, beta) - f(z, rates - e, beta)) / (2 * h), rel=1e-6)
    assert gbeta == pytest.approx((f(z, rates, beta + h) - f(z, rates, beta - h)) / (2 * h), rel=1e-6)


def test_initial_state_examples():
    p = default_parameters("SIRD", 1000)
    assert initial_state("SIRD", (10, 0, 0), p).values.tolist() == [990, 10, 0, 0]
    p = default_parameters("SEMCRD", 1000)
    z = initial_state("SEMCRD", (10, 2, 1), p, {"e0_ratio": 1.0, "mild_fraction": 0.9}).values
    np.testing.assert_allclose(z, [977, 10, 9, 1, 2, 1], atol=1e-12)
    p = default_parameters("SEIRD", 100)
    assert initial_state("SEIRD", (0, 0, 0), p, {"e0_ratio": 1.0}).values.tolist() == [100, 0, 0, 0, 0]


def test_initial_state_folds_deaths_without_d():
    z = initial_state("SIR", (10, 2, 1), default_parameters("SIR", 100)).values
    assert z.tolist() == [87, 10, 3]


def test_initial_state_infeasible():
    with pytest.raises(InfeasibleInitializationError):
        initial_state("SIRD", (90, 20, 0), default_parameters("SIRD", 100))
    with pytest.raises(InfeasibleInitializationError):
        initial_state("SEIRD", (60, 0, 0), default_parameters("SEIRD", 100), {"e0_ratio": 1.0})


@given(st.sampled_from(ALL_VARIANTS), st.floats(0, 100), st.floats(0, 100), st.floats(0, 100))
def test_initial_state_sums_to_population(variant, i0, r0, d0):
    p = default_parameters(variant, 1000)
    z = initial_state(variant, (i0, r0, d0), p, {"e0_ratio": 0.5}).values
    assert z.sum() == pytest.approx(1000, rel=1e-12)
    assert model_observables(variant, z)["I"] == pytest.approx(i0)
