"""Randomized verification suites: trial generation, calibration/holdout
budget estimation, threaded execution, and manifest replay.

A suite config is a plain dict (JSON-friendly).  Common keys:

    trials   number of martingales to draw
    seed     base seed; trial t derives its own deterministic stream
    mix      list of generator manifests with integer "weight" fields;
             trial t uses the mix entry at position t in the expanded
             weight cycle, so proportions are exact and order-free
    deltas / rs   parameter combos, cycled per trial (mix entries may
             override with their own lists)

Calibrated suites (good_lambda, lemma, weighted) take the sup of the
needed budgets over a calibration run, inflate it by a fixed safety
factor, and demand zero violations on the disjoint holdout.  Reports
embed the generator manifest as a witness, so every number can be
recomputed from the report line alone.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .inequalities import (
    DEFAULT_QUANTILES,
    VerificationReport,
    bdg_experiment,
    build_martingale,
    jump_experiment,
    lepingle_experiment,
    lepingle_growth,
    operator_fields,
    verify_good_lambda,
    verify_lemma_weak,
    verify_proof_chain,
)
from .martingale import first_variation_exceed, stopped_tail
from .operators import measure_quantiles, square, variation_pointwise
from .weights import ainfty_profile, cascade_weight, verify_weighted_good_lambda, weighted_distribution

__all__ = [
    "run_suite",
    "calibrate_good_lambda",
    "calibrate_lemma",
    "calibrate_weighted",
    "replay_report",
    "DEFAULT_SAFETY",
]

DEFAULT_SAFETY = 1.5


def _mix_cycle(mix: list[dict]) -> list[dict]:
    if not mix:
        raise ValueError("suite config needs a nonempty generator mix")
    cycle = []
    for entry in mix:
        cycle.extend([entry] * int(entry.get("weight", 1)))
    return cycle


def _combo_cycle(entry: dict, config: dict) -> list[tuple[float, float]]:
    deltas = entry.get("deltas", config.get("deltas", [0.25]))
    rs = entry.get("rs", config.get("rs", [3.0]))
    return [(float(d), float(r)) for d in deltas for r in rs]


def _trial_plan(config: dict, trial: int):
    """Mix entry and parameter combo for a trial.  The combo advances once
    per full pass over the mix cycle, so every entry eventually meets every
    combo even when the cycle lengths share factors."""
    cycle = _mix_cycle(config["mix"])
    entry = cycle[trial % len(cycle)]
    combos = _combo_cycle(entry, config)
    delta, r = combos[(trial // len(cycle)) % len(combos)]
    return entry, delta, r


def _run_trials(worker, trials: int, threads: int = 1) -> list:
    """Evaluate worker(t) for t in range(trials); results concatenate in
    trial order regardless of thread count."""
    if threads <= 1:
        chunks = [worker(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(worker, range(trials)))
    out = []
    for chunk in chunks:
        out.extend(chunk)
    return out


def _summarize(reports: list[VerificationReport]) -> dict:
    finite = [r.empirical_constant for r in reports if math.isfinite(r.empirical_constant)]
    return {
        "reports": len(reports),
        "violations": sum(not r.passed for r in reports),
        "nonzero_lhs": sum(r.lhs > 0 for r in reports),
        "sup_constant": max(finite, default=0.0),
        "infinite_constants": sum(math.isinf(r.empirical_constant) for r in reports),
    }


# ---------------------------------------------------------------------------
# good-lambda suite


def _lambda_grid(entry: dict, config: dict, field, filtration) -> np.ndarray:
    """Per-trial lambda grid: quantiles of the variation field by default;
    entries may instead pin multiples of its median (recorded in params),
    which keeps crafted trials' thresholds proportional to their scale."""
    scales = entry.get("lambda_scales")
    if scales:
        med = float(measure_quantiles(field, filtration, [0.5])[0])
        lams = np.asarray([s * med for s in scales], dtype=float)
    else:
        quantiles = entry.get("quantiles", config.get("quantiles", DEFAULT_QUANTILES))
        lams = measure_quantiles(field, filtration, quantiles)
    lams = np.unique(lams)
    return lams[lams > 0]


def _good_lambda_trial(config: dict, budget: float, trial: int) -> list[VerificationReport]:
    entry, delta, r = _trial_plan(config, trial)
    f = build_martingale(entry, trial)
    fields = operator_fields(f, r)
    reports = []
    for lam in _lambda_grid(entry, config, fields["variation"], f.filtration):
        rep = verify_good_lambda(f, delta, r, float(lam), budget, fields=fields, witness=f.generator)
        rep.params["suite"] = "good_lambda"
        rep.params["trial"] = trial
        reports.append(rep)
    return reports


def run_good_lambda(config: dict, budget: float, threads: int = 1):
    reports = _run_trials(lambda t: _good_lambda_trial(config, budget, t), int(config["trials"]), threads)
    summary = _summarize(reports)
    summary["budget"] = budget
    return reports, summary


def calibrate_good_lambda(config: dict, threads: int = 1) -> dict:
    """Sup of needed budgets over the suite, inflated by the safety factor."""
    reports, summary = run_good_lambda(config, budget=math.inf, threads=threads)
    safety = float(config.get("safety", DEFAULT_SAFETY))
    calibrated = summary["sup_constant"] * safety
    return {"budget": calibrated, "sup_constant": summary["sup_constant"], "safety": safety, "reports": len(reports)}


# ---------------------------------------------------------------------------
# weak-type lemma suite


def _lemma_trial(config: dict, budget: float, trial: int) -> list[VerificationReport]:
    entry, delta, r = _trial_plan(config, trial)
    f = build_martingale(entry, trial)
    filt = f.filtration
    vr_f = variation_pointwise(f, r)
    stop_q = float(config.get("sigma_threshold_quantile", 0.5))
    thresh = float(measure_quantiles(vr_f, filt, [stop_q])[0])
    if thresh <= 0:
        return []
    sigma = first_variation_exceed(f, r, thresh)
    # the earliest populated stop level leaves the longest tails behind it
    m_star = -1
    for m in range(max(0, filt.depth - 1)):
        if (sigma.levels == m).any():
            m_star = m
            break
    if m_star < 0:
        return []
    a_set = sigma.levels == m_star
    g = stopped_tail(f, sigma)
    vr_g = variation_pointwise(g, r)
    inside = vr_g[a_set]
    lams = list(measure_quantiles(vr_g, filt, config.get("quantiles", (0.5, 0.75, 0.9))))
    if (inside > 0).any():
        lams.append(float(inside.max()) / 1.5)
    lams = np.unique(np.asarray(lams, dtype=float))
    lams = lams[lams > 0]
    witness = dict(f.generator or {})
    witness["sigma_threshold"] = thresh
    witness["stop_rule"] = "earliest"
    reports = []
    for lam in lams:
        rep = verify_lemma_weak(g, a_set, m_star, r, float(lam), delta, budget, witness=witness)
        rep.params["suite"] = "lemma"
        rep.params["trial"] = trial
        rep.params["sigma_threshold"] = thresh
        reports.append(rep)
    return reports


def run_lemma(config: dict, budget: float, threads: int = 1):
    reports = _run_trials(lambda t: _lemma_trial(config, budget, t), int(config["trials"]), threads)
    summary = _summarize(reports)
    summary["budget"] = budget
    return reports, summary


def calibrate_lemma(config: dict, threads: int = 1) -> dict:
    reports, summary = run_lemma(config, budget=math.inf, threads=threads)
    safety = float(config.get("safety", DEFAULT_SAFETY))
    if summary["infinite_constants"]:
        raise RuntimeError("lemma suite produced an unboundable trial (positive lhs over zero rhs)")
    return {"budget": summary["sup_constant"] * safety, "sup_constant": summary["sup_constant"], "safety": safety, "reports": len(reports)}


# ---------------------------------------------------------------------------
# proof-chain suite


def _proof_chain_trial(config: dict, trial: int) -> list[VerificationReport]:
    entry, delta, r = _trial_plan(config, trial)
    f = build_martingale(entry, trial)
    reports = verify_proof_chain(f, delta, r, witness=f.generator)
    for rep in reports:
        rep.params["suite"] = "proof_chain"
        rep.params["trial"] = trial
    return reports


def run_proof_chain(config: dict, threads: int = 1):
    reports = _run_trials(lambda t: _proof_chain_trial(config, trial=t), int(config["trials"]), threads)
    return reports, _summarize(reports)


# ---------------------------------------------------------------------------
# weighted suite


def _weighted_trial(config: dict, budget: float, trial: int) -> list[VerificationReport]:
    entry, _, r = _trial_plan(config, trial)
    f = build_martingale(entry, trial)
    filt = f.filtration
    depth = filt.depth
    rho = float(config.get("rho_max", 0.3))
    weight_seed = (int(config.get("seed", 0)) * 9_000_011 + trial) % (2 ** 63)
    w = cascade_weight(depth, rho, weight_seed)
    profile = ainfty_profile(w, filt)
    epsilon = float(config.get("epsilon", 0.1))
    lemma_constant = float(config.get("lemma_constant", 16.0))
    vr = variation_pointwise(f, r)
    s_field = square(f)
    lams = np.unique(measure_quantiles(vr, filt, config.get("quantiles", DEFAULT_QUANTILES)))
    lams = lams[lams > 0]
    witness = dict(f.generator or {})
    witness["weight"] = {"depth": depth, "rho_max": rho, "seed": int(weight_seed)}
    reports = []
    for lam in lams:
        rep = verify_weighted_good_lambda(
            f, w, epsilon, r, float(lam), budget, lemma_constant, profile=profile
        )
        rep.witness = witness
        rep.params["suite"] = "weighted"
        rep.params["trial"] = trial
        if rep.params.get("admissible"):
            delta = rep.params["delta"]
            rep.params["w_square_mass"] = weighted_distribution(s_field, w, delta * float(lam))
            rep.params["w_variation_mass"] = weighted_distribution(vr, w, float(lam))
        reports.append(rep)
    return reports


def run_weighted(config: dict, budget: float, threads: int = 1):
    reports = _run_trials(lambda t: _weighted_trial(config, budget, t), int(config["trials"]), threads)
    summary = _summarize(reports)
    summary["budget"] = budget
    return reports, summary


def calibrate_weighted(config: dict, threads: int = 1) -> dict:
    """Smallest multiplier of the weighted square-function mass covering
    every calibration trial after the epsilon term is subtracted."""
    reports, _ = run_weighted(config, budget=math.inf, threads=threads)
    needed = 0.0
    epsilon = float(config.get("epsilon", 0.1))
    for rep in reports:
        if not rep.params.get("admissible"):
            continue
        ws = rep.params["w_square_mass"]
        wv = rep.params["w_variation_mass"]
        short = rep.lhs - epsilon * wv
        if short > 0:
            if ws <= 0:
                raise RuntimeError("weighted suite trial cannot be covered by any budget")
            needed = max(needed, short / ws)
    safety = float(config.get("safety", DEFAULT_SAFETY))
    return {"budget": needed * safety, "sup_constant": needed, "safety": safety, "reports": len(reports)}


# ---------------------------------------------------------------------------
# dispatch and replay


def run_suite(config: dict, threads: int = 1) -> dict:
    """Run a suite config: calibrate on the configured calibration split
    (when present), then run the main trials.  Returns reports, summary,
    and the budget used."""
    kind = config.get("suite")
    if kind in ("good_lambda", "lemma", "weighted"):
        calibrators = {
            "good_lambda": calibrate_good_lambda,
            "lemma": calibrate_lemma,
            "weighted": calibrate_weighted,
        }
        runners = {"good_lambda": run_good_lambda, "lemma": run_lemma, "weighted": run_weighted}
        if "calibration" in config:
            cal_config = {**config, **config["calibration"]}
            cal_config.pop("calibration", None)
            calibration = calibrators[kind](cal_config, threads)
            budget = calibration["budget"]
        elif "c_budget" in config:
            calibration = None
            budget = float(config["c_budget"])
        else:
            raise ValueError(f"{kind} suite needs either a 'calibration' block or an explicit 'c_budget'")
        reports, summary = runners[kind](config, budget, threads)
        if calibration is not None:
            summary["calibration"] = calibration
        return {"suite": kind, "reports": reports, "summary": summary}
    if kind == "proof_chain":
        reports, summary = run_proof_chain(config, threads)
        return {"suite": kind, "reports": reports, "summary": summary}
    if kind in ("lepingle", "jumps", "bdg"):
        manifest = config["manifest"]
        trials = int(config["trials"])
        p = float(config.get("p", 2.0))
        if kind == "lepingle":
            if "r_grid" in config:
                growth = lepingle_growth(p, config["r_grid"], manifest, trials)
                summaries = [lepingle_experiment(p, r, manifest, trials) for r in config["r_grid"]]
                return {"suite": kind, "summaries": summaries, "growth": growth}
            summaries = [lepingle_experiment(p, float(config["r"]), manifest, trials)]
        elif kind == "jumps":
            summaries = [jump_experiment(p, config.get("lambda_grid"), manifest, trials)]
        else:
            summaries = [bdg_experiment(p, manifest, trials)]
        return {"suite": kind, "summaries": summaries}
    raise ValueError(f"unknown suite kind {config.get('suite')!r}")


def replay_report(obj: dict) -> VerificationReport:
    """Recompute a report from its embedded witness manifest."""
    if isinstance(obj, VerificationReport):
        obj = obj.to_json()
    name = obj["name"]
    params = obj["params"]
    witness = obj.get("witness")
    if witness is None:
        raise ValueError("report carries no witness manifest; cannot replay")
    f = build_martingale(witness, int(witness.get("trial", 0)))
    if name == "good_lambda":
        return verify_good_lambda(
            f, params["delta"], params["r"], params["lambda"], params["budget"], witness=witness
        )
    if name == "lemma_weak":
        sigma = first_variation_exceed(f, params["r"], witness["sigma_threshold"])
        a_set = sigma.levels == int(params["m"])
        g = stopped_tail(f, sigma)
        return verify_lemma_weak(
            g, a_set, int(params["m"]), params["r"], params["lambda"], params["delta"], params["budget"], witness=witness
        )
    if name.startswith("proof_chain/"):
        reports = verify_proof_chain(f, params["delta"], params["r"], witness=witness)
        for rep in reports:
            if rep.name == name:
                return rep
        raise ValueError(f"proof chain step {name!r} not found")
    if name == "weighted_good_lambda":
        wspec = witness["weight"]
        w = cascade_weight(int(wspec["depth"]), float(wspec["rho_max"]), int(wspec["seed"]))
        return verify_weighted_good_lambda(
            f,
            w,
            params["epsilon"],
            params["r"],
            params["lambda"],
            params["C_budget"] if "C_budget" in params else params["budget"],
            params["lemma_constant"],
        )
    raise ValueError(f"no replay rule for report {name!r}")
