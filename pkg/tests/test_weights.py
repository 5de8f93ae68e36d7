import numpy as np
import pytest

from martvar.filtration import dyadic_filtration, stick_filtration
from martvar.martingale import from_terminal, random_martingale
from martvar.operators import maximal, square, variation_pointwise
from martvar.weights import (
    DyadicWeight,
    ainfty_profile,
    atom_masses,
    cascade_weight,
    doubling_constant,
    verify_weighted_good_lambda,
    weight_from_json,
    weight_to_json,
    weighted_distribution,
)


def alternating_dyadic_terminal(depth: int, amp: float) -> np.ndarray:
    # cell 0's ancestor averages alternate +/- amp; each right-half block is
    # constant at the value that realizes the next average
    mu = amp * (-1.0) ** np.arange(depth + 1)
    term = np.empty(1 << depth)
    for k in range(depth):
        term[1 << (depth - k - 1) : 1 << (depth - k)] = 2.0 * mu[k] - mu[k + 1]
    term[0] = mu[depth]
    return term


def test_cascade_zero_rho_is_lebesgue():
    w = cascade_weight(6, 0.0, 123)
    assert np.array_equal(w.density, np.ones(64))
    assert doubling_constant(w, dyadic_filtration(6)) == 1.0


def test_cascade_deterministic():
    a = cascade_weight(8, 0.4, 9)
    b = cascade_weight(8, 0.4, 9)
    assert np.array_equal(a.density, b.density)
    c = cascade_weight(8, 0.4, 10)
    assert not np.array_equal(a.density, c.density)


def test_cascade_parameter_errors():
    with pytest.raises(ValueError):
        cascade_weight(5, 1.0, 0)
    with pytest.raises(ValueError):
        cascade_weight(5, -0.1, 0)
    with pytest.raises(ValueError):
        DyadicWeight(2, [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        DyadicWeight(1, [1.0, 0.0])


def test_cascade_doubling_bound():
    filt = dyadic_filtration(8)
    for seed in range(50):
        rho = (0.1, 0.3, 0.5, 0.7)[seed % 4]
        w = cascade_weight(8, rho, seed)
        assert doubling_constant(w, filt) <= (1 + rho) / (1 - rho)


def test_doubling_example_and_requirements():
    assert doubling_constant(DyadicWeight(1, [3.0, 1.0]), dyadic_filtration(1)) == pytest.approx(3.0)
    w = cascade_weight(3, 0.2, 1)
    with pytest.raises(ValueError):
        doubling_constant(w, stick_filtration(3))
    with pytest.raises(ValueError):
        doubling_constant(w, dyadic_filtration(4))


def test_atom_masses_additivity_bitwise():
    filt = dyadic_filtration(10)
    for seed in range(5):
        masses = atom_masses(cascade_weight(10, 0.6, seed), filt)
        for n in range(len(masses) - 1):
            assert np.array_equal(masses[n], masses[n + 1][0::2] + masses[n + 1][1::2])


def test_lebesgue_profile_equals_gamma_on_dyadic_grid():
    depth = 5
    filt = dyadic_filtration(depth)
    leb = cascade_weight(depth, 0.0, 0)
    grid = [k / 2 ** depth for k in range(1, 2 ** depth)]
    prof = ainfty_profile(leb, filt, grid)
    for g, e in zip(prof.gammas, prof.epsilons):
        assert e == g  # exact, both are dyadic rationals


def test_profile_monotone_bounded_and_tiny_gamma():
    filt = dyadic_filtration(6)
    w = cascade_weight(6, 0.5, 7)
    prof = ainfty_profile(w, filt, [1 / 128, 1 / 64, 1 / 8, 1 / 4, 1 / 2, 3 / 4])
    assert (np.diff(prof.epsilons) >= 0).all()
    assert (prof.epsilons <= 1.0).all()
    # budget below one cell at every interval: extremal sets are empty
    assert prof.epsilon_for(1 / 128) == 0.0
    assert prof.max_gamma_with_epsilon_at_most(0.999) == 0.75
    with pytest.raises(KeyError):
        prof.epsilon_for(0.33)
    with pytest.raises(ValueError):
        ainfty_profile(w, filt, [0.0, 0.5])


def test_profile_dominates_lebesgue_share():
    # heaviest-cells fill can only concentrate more than the Lebesgue share
    filt = dyadic_filtration(5)
    w = cascade_weight(5, 0.4, 3)
    grid = [k / 32 for k in range(1, 32)]
    prof = ainfty_profile(w, filt, grid)
    assert (prof.epsilons >= prof.gammas - 1e-12).all()


def test_weighted_distribution_examples():
    w = DyadicWeight(2, np.array([0.4, 0.2, 0.2, 0.2]) * 4)
    field = np.array([1.0, 0.0, 0.0, 0.0])
    assert weighted_distribution(field, w, 0.5) == pytest.approx(0.4)
    assert weighted_distribution(field, w, 2.0) == 0.0
    assert weighted_distribution(field, w, -1.0) == pytest.approx(1.0)
    subset = np.array([False, True, True, True])
    assert weighted_distribution(field, w, 0.5, subset=subset) == 0.0


def test_weighted_good_lambda_constant_martingale():
    depth = 6
    f = from_terminal(dyadic_filtration(depth), np.full(1 << depth, 3.0))
    w = cascade_weight(depth, 0.3, 5)
    rep = verify_weighted_good_lambda(f, w, epsilon=0.25, r=3.0, lam=1.0, c_budget=1.0, lemma_constant=16.0)
    assert rep.lhs == 0.0 and rep.passed


def test_weighted_good_lambda_lebesgue_matches_unweighted():
    depth = 8
    filt = dyadic_filtration(depth)
    f = random_martingale(filt, "terminal_gaussian", 21)
    leb = cascade_weight(depth, 0.0, 0)
    rep_w = verify_weighted_good_lambda(
        f, leb, epsilon=0.25, r=3.0, lam=0.8, c_budget=5.0, lemma_constant=16.0, delta=0.3
    )
    # same events measured with the Lebesgue weight: the lhs agrees with the
    # unweighted joint measure up to the strict-vs-nonstrict maximal cutoff
    vr = variation_pointwise(f, 3.0)
    m_field = maximal(f)
    joint = filt.cell_measure[(vr > 3 * 0.8) & (m_field < 0.3 * 0.8)].sum()
    assert rep_w.lhs == pytest.approx(joint, abs=1e-15)
    assert rep_w.passed


def test_weighted_good_lambda_nonzero_event():
    depth = 14
    filt = dyadic_filtration(depth)
    f = from_terminal(filt, alternating_dyadic_terminal(depth, 1.0))
    r, lam, delta = 2.05, 2.3, 0.45
    vr = variation_pointwise(f, r)
    m_field = maximal(f)
    assert ((vr > 3 * lam) & (m_field < delta * lam)).sum() >= 1
    w = cascade_weight(depth, 0.3, 9)
    rep = verify_weighted_good_lambda(
        f, w, epsilon=0.5, r=r, lam=lam, c_budget=10.0, lemma_constant=16.0, delta=delta
    )
    assert rep.lhs > 0.0
    assert rep.params["containment_max_ratio"] >= 0.0
    assert "delta_max" in rep.params and "gamma" in rep.params
    # epsilon term alone covers the event here: the deepest cell is a tiny
    # fraction of {V_r > lam} in any cascade weight at this depth
    assert rep.passed


def test_weighted_good_lambda_no_admissible_delta():
    depth = 6
    f = random_martingale(dyadic_filtration(depth), "terminal_gaussian", 2)
    w = cascade_weight(depth, 0.3, 4)
    rep = verify_weighted_good_lambda(f, w, epsilon=1e-6, r=3.0, lam=1.0, c_budget=1.0, lemma_constant=16.0)
    assert rep.params["admissible"] == 0.0
    assert rep.passed


def test_weighted_parameter_errors():
    depth = 4
    f = random_martingale(dyadic_filtration(depth), "terminal_gaussian", 0)
    w = cascade_weight(depth, 0.2, 1)
    with pytest.raises(ValueError):
        verify_weighted_good_lambda(f, w, epsilon=0.1, r=2.0, lam=1.0, c_budget=1.0, lemma_constant=16.0)
    with pytest.raises(ValueError):
        verify_weighted_good_lambda(f, w, epsilon=0.1, r=3.0, lam=0.0, c_budget=1.0, lemma_constant=16.0)
    with pytest.raises(ValueError):
        verify_weighted_good_lambda(
            f, cascade_weight(5, 0.2, 1), epsilon=0.1, r=3.0, lam=1.0, c_budget=1.0, lemma_constant=16.0
        )


def test_square_functions_identical_on_dyadic_weights_setting():
    # the weighted corollary leans on the square functions agreeing for
    # dyadic refinements
    from martvar.operators import conditional_square

    f = random_martingale(dyadic_filtration(9), "uniform_terminal", 11)
    assert np.abs(square(f) - conditional_square(f)).max() <= 1e-10


def test_weight_serialization_round_trip():
    w = cascade_weight(7, 0.35, 13)
    back = weight_from_json(weight_to_json(w))
    assert back.depth == w.depth
    assert np.array_equal(back.density, w.density)
    with pytest.raises(ValueError):
        weight_from_json({"schema": "nope"})
