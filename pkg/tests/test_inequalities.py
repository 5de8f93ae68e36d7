import math

import numpy as np
import pytest

from martvar.filtration import dyadic_filtration
from martvar.inequalities import (
    VerificationReport,
    adversarial_search,
    bdg_experiment,
    build_martingale,
    jump_experiment,
    lepingle_experiment,
    lepingle_growth,
    replay_search,
    verify_good_lambda,
    verify_lemma_weak,
    verify_proof_chain,
)
from martvar.martingale import first_variation_exceed, from_terminal, proof_sets, random_martingale, stopped_tail
from martvar.operators import jump_count_pointwise, lp_norm, variation_pointwise

RADEMACHER_10 = {"generator": "dyadic_rademacher", "filtration": "dyadic", "depth": 10, "seed": 5}

OSCILLATING_96 = {
    "generator": "oscillating",
    "filtration": "stick",
    "depth": 96,
    "seed": 104,
    "params": {"amplitude": 1.0, "amplitude_jitter": 0.2, "noise": 0.02},
}


def test_good_lambda_constant_martingale_vacuous():
    f = from_terminal(dyadic_filtration(4), np.full(16, 2.0))
    rep = verify_good_lambda(f, 0.25, 3.0, 1.0, 1.0)
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.passed


def test_good_lambda_empty_when_maximal_large():
    # |f_0| bounds the maximal function from below, so a large mean empties
    # the joint event
    f = random_martingale(dyadic_filtration(6), "terminal_gaussian", 3)
    shifted = from_terminal(f.filtration, f.terminal() + 100.0)
    rep = verify_good_lambda(shifted, 0.25, 3.0, 1.0, 0.0)
    assert rep.lhs == 0.0 and rep.passed


def test_good_lambda_zero_budget_fails_on_positive_event():
    # one planted cell of measure 2^-14 oscillates hard while staying small
    man = {"generator": "oscillating", "filtration": "dyadic", "depth": 14, "seed": 9, "params": {"amplitude": 1.0}}
    f = build_martingale(man, 0)
    rep = verify_good_lambda(f, 0.45, 2.05, 2.3, 0.0)
    assert rep.lhs == pytest.approx(2.0 ** -14)
    assert not rep.passed
    ok = verify_good_lambda(f, 0.45, 2.05, 2.3, 2.0 * rep.empirical_constant)
    assert ok.passed


def test_good_lambda_subtolerance_event_passes_zero_budget():
    # stick-breaking events carry measure 2^-96, far below the absolute
    # report tolerance, so even a zero budget absorbs them
    f = build_martingale(OSCILLATING_96, 0)
    vr = variation_pointwise(f, 2.5)
    from martvar.operators import measure_quantiles

    lam = float(measure_quantiles(vr, f.filtration, [0.75])[0])
    rep = verify_good_lambda(f, 0.4, 2.5, lam, 0.0)
    assert 0.0 < rep.lhs < 1e-12
    assert rep.passed


def test_good_lambda_rademacher_grid_passes_at_calibrated_budget():
    from martvar.operators import measure_quantiles
    from martvar.inequalities import operator_fields

    needed = 0.0
    cases = []
    for seed in range(10):
        f = random_martingale(dyadic_filtration(8), "dyadic_rademacher", 3000 + seed)
        fields = operator_fields(f, 3.0)
        lams = np.unique(measure_quantiles(fields["variation"], f.filtration, (0.1, 0.25, 0.5, 0.75, 0.9)))
        for lam in lams[lams > 0]:
            rep = verify_good_lambda(f, 0.25, 3.0, float(lam), 1.0, fields=fields)
            needed = max(needed, rep.empirical_constant)
            cases.append((f, fields, float(lam)))
    budget = max(needed, 1e-12) * 1.5
    for f, fields, lam in cases:
        assert verify_good_lambda(f, 0.25, 3.0, lam, budget, fields=fields).passed


def test_good_lambda_parameter_errors():
    f = from_terminal(dyadic_filtration(2), np.zeros(4))
    with pytest.raises(ValueError):
        verify_good_lambda(f, 0.5, 3.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        verify_good_lambda(f, 0.25, 2.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        verify_good_lambda(f, 0.25, 3.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        verify_good_lambda(f, 0.25, 3.0, 1.0, -1.0)


def test_report_json_round_trip():
    f = from_terminal(dyadic_filtration(3), np.arange(8.0))
    rep = verify_good_lambda(f, 0.25, 3.0, 1.0, 1.0, witness={"generator": "manual"})
    back = VerificationReport.from_json(rep.to_json())
    assert back == rep


# -- weak-type lemma ----------------------------------------------------------


def test_lemma_empty_set():
    f = random_martingale(dyadic_filtration(5), "terminal_gaussian", 1)
    sigma = first_variation_exceed(f, 2.5, 1.0)
    g = stopped_tail(f, sigma)
    rep = verify_lemma_weak(g, np.zeros(32, dtype=bool), 2, 2.5, 1.0, 0.25, 5.0)
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.passed


def test_lemma_stopped_tail_hypothesis_auto_satisfied():
    # random tails give trivially-true reports; the planted oscillation
    # keeps swinging after the stop, so its events are nonempty
    cases = [random_martingale(dyadic_filtration(8), "terminal_gaussian", seed) for seed in range(4)]
    cases += [build_martingale(OSCILLATING_96, t) for t in range(4)]
    hits = 0
    for f in cases:
        filt = f.filtration
        vr_f = variation_pointwise(f, 2.5)
        from martvar.operators import measure_quantiles

        thresh = float(measure_quantiles(vr_f, filt, [0.5])[0])
        if thresh <= 0:
            continue
        sigma = first_variation_exceed(f, 2.5, thresh)
        g = stopped_tail(f, sigma)
        vr_g = variation_pointwise(g, 2.5)
        for m_star in range(filt.depth - 1):
            a_set = sigma.levels == m_star
            if not a_set.any():
                continue
            inside = vr_g[a_set]
            if not (inside > 0).any():
                continue
            lam = float(inside.max()) / 1.5
            rep = verify_lemma_weak(g, a_set, m_star, 2.5, lam, 0.45, 50.0)
            assert math.isfinite(rep.empirical_constant)
            assert rep.passed
            if rep.lhs > 0:
                hits += 1
            break
    assert hits > 0  # nontrivial events exercised


def test_lemma_delta_below_maximal_empties_lhs():
    f = random_martingale(dyadic_filtration(6), "terminal_gaussian", 9)
    sigma = first_variation_exceed(f, 2.5, 0.5)
    g = stopped_tail(f, sigma)
    a_set = sigma.levels == int(sigma.levels.min())
    # lambda so small that delta*lambda is below every maximal value on A
    rep = verify_lemma_weak(g, a_set, int(sigma.levels.min()), 2.5, 1e-9, 0.25, 1.0)
    assert rep.lhs == 0.0 or rep.passed


def test_lemma_precondition_errors():
    f = random_martingale(dyadic_filtration(4), "terminal_gaussian", 2)
    full = np.ones(16, dtype=bool)
    with pytest.raises(ValueError, match="vanish"):
        verify_lemma_weak(f, full, 0, 2.5, 1.0, 0.25, 1.0)
    sigma = first_variation_exceed(f, 2.5, 0.5)
    g = stopped_tail(f, sigma)
    ragged = np.zeros(16, dtype=bool)
    ragged[0] = True  # not a union of level-1 atoms
    with pytest.raises(ValueError, match="atoms"):
        verify_lemma_weak(g, ragged, 1, 2.5, 1.0, 0.25, 1.0)


# -- proof chain ---------------------------------------------------------------


def test_proof_chain_constant_vacuous():
    f = from_terminal(dyadic_filtration(4), np.full(16, 5.0))
    reports = verify_proof_chain(f, 0.25, 3.0)
    assert [r.name for r in reports] == [
        "proof_chain/doob",
        "proof_chain/containment",
        "proof_chain/transform_on_good",
        "proof_chain/level_isometry",
        "proof_chain/stopped_bound",
    ]
    assert all(r.passed for r in reports)


def test_proof_chain_doob_hand_case():
    # oscillation confined to one finest pair: core and halo both carry 1/8
    filt = dyadic_filtration(4)
    term = np.zeros(16)
    term[0], term[1] = 1.0, -1.0
    f = from_terminal(filt, term)
    sets = proof_sets(f, 0.25)
    assert np.flatnonzero(sets.core).tolist() == [0, 1]
    assert np.flatnonzero(sets.halo).tolist() == [0, 1]
    rep = verify_proof_chain(f, 0.25, 3.0)[0]
    assert rep.lhs == pytest.approx(1.0 / 8.0)
    assert rep.rhs == pytest.approx(1.0 / 8.0)
    assert rep.passed  # 1/8 <= 4 * 1/8


def test_proof_chain_randomized_zero_violations():
    combos = [(d, r) for d in (0.1, 0.25, 0.4) for r in (2.5, 3.0, 4.0)]
    scales = [1.0, 0.3, 0.1]
    n_nontrivial_good = 0
    for trial in range(60):
        delta, r = combos[trial % len(combos)]
        f = random_martingale(
            dyadic_filtration(10), "terminal_gaussian", 1000 + trial, scale=scales[trial % len(scales)]
        )
        reports = verify_proof_chain(f, delta, r)
        for rep in reports:
            assert rep.passed, (rep.name, rep.lhs, rep.rhs, rep.params)
        sets = proof_sets(f, delta)
        if sets.good.any() and not sets.good.all():
            n_nontrivial_good += 1
    assert n_nontrivial_good > 5


# -- experiments ----------------------------------------------------------------


def test_lepingle_constant_martingale_records_zero():
    man = {"generator": "terminal_gaussian", "filtration": "dyadic", "depth": 4, "seed": 1, "params": {"scale": 0.0}}
    summary = lepingle_experiment(2, 3.0, man, 3)
    # zero terminal means zero denominator: excluded and counted
    assert summary.excluded_zero == 3 and summary.ratios == []


def test_lepingle_ratio_monotone_in_r():
    maxima = {r: lepingle_experiment(2, r, RADEMACHER_10, 40).max_ratio for r in (2.1, 2.5, 3.0, 4.0)}
    assert maxima[2.1] >= maxima[2.5] >= maxima[3.0] >= maxima[4.0]


def test_lepingle_rerun_stability():
    a = lepingle_experiment(2, 3.0, RADEMACHER_10, 50).max_ratio
    b = lepingle_experiment(2, 3.0, {**RADEMACHER_10, "seed": 77}, 50).max_ratio
    assert abs(a - b) <= 0.1 * max(a, b)


def test_lepingle_weak_type_branch():
    summary = lepingle_experiment(1, 3.0, {**RADEMACHER_10, "depth": 6}, 10)
    assert summary.ratios and all(r > 0 for r in summary.ratios)


def test_lepingle_growth_fit():
    growth = lepingle_growth(2, [2.1, 2.5, 3.0, 4.0], {**RADEMACHER_10, "depth": 8}, 20)
    assert growth["fitted_coefficient"] > 0
    assert growth["max_ratios"] == sorted(growth["max_ratios"], reverse=True)


def test_empirical_sup_monotone_under_inclusion():
    small = lepingle_experiment(2, 3.0, RADEMACHER_10, 20).max_ratio
    large = lepingle_experiment(2, 3.0, RADEMACHER_10, 60).max_ratio
    assert large >= small


def test_jump_experiment_zero_and_large_lambda():
    man = {"generator": "terminal_gaussian", "filtration": "dyadic", "depth": 5, "seed": 2, "params": {"scale": 0.0}}
    summary = jump_experiment(2, [0.5], man, 2)
    assert summary.excluded_zero == 2
    f = random_martingale(dyadic_filtration(6), "terminal_gaussian", 4)
    lam = 2.0 * np.abs(f.cell_matrix()).max() + 1.0
    assert (jump_count_pointwise(f, lam) == 0).all()
    s2 = jump_experiment(2, [float(lam)], {"generator": "terminal_gaussian", "filtration": "dyadic", "depth": 6, "seed": 4}, 1)
    assert s2.ratios == [0.0]


def test_jump_experiment_stable():
    a = jump_experiment(2, None, RADEMACHER_10, 30).max_ratio
    b = jump_experiment(2, None, {**RADEMACHER_10, "seed": 99}, 30).max_ratio
    assert math.isfinite(a) and a > 0
    assert abs(a - b) <= 0.1 * max(a, b)


def test_bdg_dyadic_convexity_ratio_is_one():
    summary = bdg_experiment(2, RADEMACHER_10, 20)
    assert summary.extra["convexity_kind"] == "cond_square_over_square"
    assert summary.extra["convexity_ratios_max"] == pytest.approx(1.0, abs=1e-9)
    assert math.isfinite(summary.extra["max_maximal_over_square"])
    low = bdg_experiment(1.5, {**RADEMACHER_10, "depth": 6}, 10)
    assert low.extra["convexity_kind"] == "maximal_over_cond_square"


# -- adversarial search -----------------------------------------------------------


SEARCH_PARAMS = {"p": 2, "r": 3, "depth": 6}


def test_search_budget_one_is_single_probe():
    res = adversarial_search("lepingle_ratio", SEARCH_PARAMS, 1, 77)
    assert res.evaluations == 1
    assert res.manifest["trace"] == []
    filt = dyadic_filtration(6)
    x = np.random.default_rng([77, 0xA11CE, 0]).standard_normal(64)
    f = from_terminal(filt, x)
    expected = lp_norm(variation_pointwise(f, 3), filt, 2) / lp_norm(f.terminal(), filt, 2)
    assert res.best_objective == pytest.approx(expected, rel=1e-12)


def test_search_deterministic_and_replayable():
    res1 = adversarial_search("lepingle_ratio", SEARCH_PARAMS, 120, 7)
    res2 = adversarial_search("lepingle_ratio", SEARCH_PARAMS, 120, 7)
    assert res1.to_json() == res2.to_json()
    replayed = replay_search(res1.manifest)
    assert abs(replayed - res1.best_objective) <= 1e-9 * max(1.0, res1.best_objective)


def test_search_beats_probe_baseline():
    budget = 200
    res = adversarial_search("lepingle_ratio", SEARCH_PARAMS, budget, 77)
    filt = dyadic_filtration(6)

    def objective(x):
        f = from_terminal(filt, x)
        denom = lp_norm(f.terminal(), filt, 2)
        return 0.0 if denom == 0.0 else lp_norm(variation_pointwise(f, 3), filt, 2) / denom

    baseline = max(
        objective(np.random.default_rng([77, 0xA11CE, k]).standard_normal(64)) for k in range(budget)
    )
    assert res.best_objective >= baseline


def test_search_result_monotone_in_r_on_fixed_manifest():
    # replaying one found terminal across the r grid: the variation ratio
    # can only shrink as r grows, path by path
    res = adversarial_search("lepingle_ratio", {"p": 2, "r": 2.1, "depth": 6}, 80, 13)
    values = []
    for r in (2.1, 2.5, 3.0, 4.0):
        manifest = dict(res.manifest)
        manifest["params"] = {**manifest["params"], "r": r}
        values.append(replay_search(manifest))
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


def test_search_objectives_run():
    for objective in ("jump_ratio", "good_lambda_constant"):
        res = adversarial_search(objective, {"depth": 5, "delta": 0.4, "r": 2.5, "lam": 0.5, "p": 2}, 20, 5)
        assert res.evaluations == 20
        assert math.isfinite(res.best_objective)
    with pytest.raises(ValueError):
        adversarial_search("nonsense", {}, 5, 1)
    with pytest.raises(ValueError):
        adversarial_search("jump_ratio", {}, 0, 1)
