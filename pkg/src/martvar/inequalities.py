"""Distributional inequality verifiers, norm-ratio experiments, and
adversarial constant search.

Every check is packaged as a VerificationReport with the convention

    pass  <=>  lhs <= budget * rhs + tolerance,

where the budget and tolerance are recorded in the report parameters and
`empirical_constant` is the smallest budget that would have passed
(lhs / rhs).  Calibrating a suite therefore means taking the sup of the
empirical constants over the calibration trials, inflating by a safety
factor, and demanding zero violations on a disjoint holdout.  Empirical
constants are data about the tested suites, never claims about the
sharp constants of the underlying theorems.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .filtration import Filtration, conditional_expectation, dyadic_filtration, stick_filtration
from .martingale import (
    Martingale,
    first_variation_exceed,
    from_terminal,
    martingale_residual,
    proof_sets,
    random_martingale,
    stopped_tail,
    truncated_transform,
)
from .operators import (
    conditional_square,
    distribution,
    jump_count_pointwise,
    lp_norm,
    maximal,
    measure_quantiles,
    square,
    variation_pointwise,
)

__all__ = [
    "VerificationReport",
    "ExperimentSummary",
    "SearchResult",
    "verify_good_lambda",
    "verify_lemma_weak",
    "verify_proof_chain",
    "lepingle_experiment",
    "lepingle_growth",
    "jump_experiment",
    "bdg_experiment",
    "adversarial_search",
    "replay_search",
    "build_martingale",
    "operator_fields",
    "DEFAULT_QUANTILES",
]

DEFAULT_QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)

REPORT_TOL = 1e-12


@dataclass
class VerificationReport:
    """Both sides of one tested inequality plus the pass verdict.

    empirical_constant is the smallest budget that would make the check
    pass; +inf when rhs vanishes under positive lhs.
    """

    name: str
    lhs: float
    rhs: float
    empirical_constant: float
    params: dict
    passed: bool
    witness: dict | None = None

    def to_json(self) -> dict:
        obj = {
            "schema": "martvar.report/1",
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "empirical_constant": self.empirical_constant,
            "params": self.params,
            "pass": self.passed,
        }
        if self.witness is not None:
            obj["witness"] = self.witness
        return obj

    @staticmethod
    def from_json(obj: dict) -> "VerificationReport":
        return VerificationReport(
            name=obj["name"],
            lhs=obj["lhs"],
            rhs=obj["rhs"],
            empirical_constant=obj["empirical_constant"],
            params=obj["params"],
            passed=obj["pass"],
            witness=obj.get("witness"),
        )


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0.0:
        return lhs / rhs
    return 0.0 if lhs <= 0.0 else math.inf


def _report(name, lhs, rhs, budget, params, witness=None, tolerance=REPORT_TOL):
    params = dict(params)
    params["budget"] = float(budget)
    params["tolerance"] = float(tolerance)
    allowance = budget * rhs if rhs > 0.0 else 0.0  # avoids inf * 0 during calibration
    return VerificationReport(
        name=name,
        lhs=float(lhs),
        rhs=float(rhs),
        empirical_constant=_ratio(lhs, rhs),
        params=params,
        passed=bool(lhs <= allowance + tolerance),
        witness=witness,
    )


def operator_fields(f: Martingale, r: float) -> dict:
    """Shared per-cell operator fields for a lambda grid of checks."""
    return {
        "variation": variation_pointwise(f, r),
        "maximal": maximal(f),
        "cond_square": conditional_square(f),
        "square": square(f),
    }


# ---------------------------------------------------------------------------
# the good-lambda inequality and its ingredients


def verify_good_lambda(
    f: Martingale,
    delta: float,
    r: float,
    lam: float,
    c_budget: float,
    fields: dict | None = None,
    witness: dict | None = None,
) -> VerificationReport:
    """Distributional check

        nu{V_r > 3 lam, M <= delta lam}
            <= budget * ( nu{s > delta lam} + delta^2/(r-2)^2 nu{V_r > lam} ).

    All measures come from exact pointwise operator fields.
    """
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    if not r > 2.0:
        raise ValueError(f"r must exceed 2, got {r}")
    if lam <= 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if c_budget < 0.0:
        raise ValueError(f"budget must be nonnegative, got {c_budget}")
    filt = f.filtration
    ops = fields if fields is not None else operator_fields(f, r)
    joint = distribution(ops["variation"], filt, 3.0 * lam, subset=ops["maximal"] <= delta * lam)
    rhs = distribution(ops["cond_square"], filt, delta * lam) + (delta / (r - 2.0)) ** 2 * distribution(
        ops["variation"], filt, lam
    )
    params = {"delta": delta, "r": r, "lambda": lam, "depth": filt.depth}
    return _report("good_lambda", joint, rhs, c_budget, params, witness)


def verify_lemma_weak(
    f: Martingale,
    a_set: np.ndarray,
    m: int,
    r: float,
    lam: float,
    delta: float,
    c_budget: float,
    witness: dict | None = None,
) -> VerificationReport:
    """Weak-type check on a level-m set where the martingale starts flat:

        nu{A, V_r > lam, M <= delta lam}
            <= budget * lam^-2 (r-2)^-2 * integral_A f_N^2.

    Preconditions checked: A is a union of level-m atoms and f_n is
    identically zero on A for every n <= m.
    """
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    if not r > 2.0:
        raise ValueError(f"r must exceed 2, got {r}")
    if lam <= 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")
    filt = f.filtration
    a_set = np.asarray(a_set, dtype=bool)
    if not 0 <= m <= filt.depth:
        raise ValueError(f"level m must be in 0..{filt.depth}, got {m}")
    hit = np.unique(filt.atom_index[m][a_set]) if a_set.any() else np.empty(0, dtype=np.intp)
    for a in hit:
        if not a_set[filt.levels[m][a]].all():
            raise ValueError(f"A is not a union of level-{m} atoms (atom {a} is split)")
    mat = f.cell_matrix()
    for n in range(m + 1):
        if np.any(mat[n][a_set] != 0.0):
            raise ValueError(f"hypothesis violated: f_{n} does not vanish on A")
    vr = variation_pointwise(f, r)
    m_field = maximal(f)
    lhs = distribution(vr, filt, lam, subset=a_set & (m_field <= delta * lam))
    rhs = float((filt.cell_measure[a_set] * mat[filt.depth][a_set] ** 2).sum()) / (lam ** 2 * (r - 2.0) ** 2)
    params = {"m": m, "r": r, "lambda": lam, "delta": delta, "depth": filt.depth}
    return _report("lemma_weak", lhs, rhs, c_budget, params, witness)


def verify_proof_chain(f: Martingale, delta: float, r: float, witness: dict | None = None) -> list[VerificationReport]:
    """Step-by-step check of the good-lambda construction at unit scale.

    1. halo measure <= 4 * core measure;
    2. {V_r(f) > 3, M(f) < delta, good} inside {V_r(g) > 1, M(g) < 2 delta,
       good} for the tail g after the prefix variation first exceeds 1;
    3. the calm-truncated transform equals g - g_0 on good cells exactly
       (identical arithmetic on both sides) and is itself a martingale;
    4. for every stop level, the squared terminal mass of the transform
       equals the summed conditional squares (finite-depth isometry);
    5. for every stop level, that mass is at most 2 delta^2 times the
       level's measure.
    """
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    if not r > 2.0:
        raise ValueError(f"r must exceed 2, got {r}")
    filt = f.filtration
    meas = filt.cell_measure
    base = {"delta": delta, "r": r, "depth": filt.depth}
    reports = []

    sets = proof_sets(f, delta)
    core_m = float(meas[sets.core].sum())
    halo_m = float(meas[sets.halo].sum())
    reports.append(_report("proof_chain/doob", halo_m, core_m, 4.0, base, witness))

    sigma = first_variation_exceed(f, r, 1.0)
    g = stopped_tail(f, sigma)
    vr_f = variation_pointwise(f, r)
    m_f = maximal(f)
    vr_g = variation_pointwise(g, r)
    m_g = maximal(g)
    lhs_set = (vr_f > 3.0) & (m_f < delta) & sets.good
    rhs_set = (vr_g > 1.0) & (m_g < 2.0 * delta) & sets.good
    escaped = float(meas[lhs_set & ~rhs_set].sum())
    params = dict(base)
    params["lhs_set_measure"] = float(meas[lhs_set].sum())
    reports.append(_report("proof_chain/containment", escaped, 0.0, 1.0, params, witness, tolerance=0.0))

    gt = truncated_transform(g, sets)
    diffs = np.diff(g.cell_matrix(), axis=0)
    plain = np.vstack([np.zeros((1, filt.num_cells)), np.cumsum(diffs, axis=0)])
    mismatch = 0.0
    if sets.good.any():
        mismatch = float(np.abs(gt.cell_matrix()[:, sets.good] - plain[:, sets.good]).max())
    params = dict(base)
    params["transform_residual"] = martingale_residual(gt)
    reports.append(_report("proof_chain/transform_on_good", mismatch, 0.0, 1.0, params, witness, tolerance=0.0))

    # Conditional squares of the truncated differences, one field per level.
    masked = diffs * np.stack([sets.calm[n].astype(float) for n in range(filt.depth)])
    cond_sq = np.zeros(filt.num_cells)
    for n in range(1, filt.depth + 1):
        cond_sq += conditional_expectation(masked[n - 1] ** 2, n - 1, filt)
    tail_sq = gt.cell_matrix()[filt.depth] ** 2
    worst_gap = 0.0
    worst_ratio = 0.0
    worst = {"m": -1, "lhs": 0.0, "rhs": 0.0}
    bound_worst = {"m": -1, "lhs": 0.0, "rhs": 0.0}
    for m in range(filt.depth + 2):
        stop = sigma.levels == m
        if not stop.any():
            continue
        lhs_m = float((meas[stop] * tail_sq[stop]).sum())
        rhs_m = float((meas[stop] * cond_sq[stop]).sum())
        gap = abs(lhs_m - rhs_m) / max(lhs_m, rhs_m, 1e-30)
        if gap >= worst_gap:
            worst_gap, worst = gap, {"m": m, "lhs": lhs_m, "rhs": rhs_m}
        cap = 2.0 * delta ** 2 * float(meas[stop].sum())
        ratio = _ratio(lhs_m, cap)
        if ratio >= worst_ratio:
            worst_ratio, bound_worst = ratio, {"m": m, "lhs": lhs_m, "rhs": cap}
    params = dict(base)
    params["worst_level"] = float(worst["m"])
    params["relative_gap"] = worst_gap
    identity = VerificationReport(
        name="proof_chain/level_isometry",
        lhs=worst["lhs"],
        rhs=worst["rhs"],
        empirical_constant=_ratio(worst["lhs"], worst["rhs"]),
        params={**params, "budget": 1.0, "tolerance": 1e-9},
        passed=bool(worst_gap <= 1e-9),
        witness=witness,
    )
    reports.append(identity)

    params = dict(base)
    params["worst_level"] = float(bound_worst["m"])
    reports.append(
        _report(
            "proof_chain/stopped_bound",
            bound_worst["lhs"],
            bound_worst["rhs"],
            1.0,
            params,
            witness,
            tolerance=1e-12,
        )
    )
    return reports


# ---------------------------------------------------------------------------
# martingale suites


_FILTRATION_CACHE: dict[tuple, Filtration] = {}


def _suite_filtration(kind: str, depth: int) -> Filtration:
    key = (kind, depth)
    if key not in _FILTRATION_CACHE:
        if kind == "dyadic":
            _FILTRATION_CACHE[key] = dyadic_filtration(depth)
        elif kind == "stick":
            _FILTRATION_CACHE[key] = stick_filtration(depth)
        else:
            raise ValueError(f"unknown filtration kind {kind!r}")
    return _FILTRATION_CACHE[key]


def _trial_seed(seed: int, trial: int) -> int:
    return (int(seed) * 1_000_003 + int(trial)) % (2 ** 63)


def _oscillating_terminal(filt_kind, depth, pattern, noise, amp, rng):
    """Terminal whose distinguished cell's ancestor averages follow the
    given pattern: each peeled sibling block is constant at the value that
    realizes the next average (2 mu_k - mu_{k+1}).

    On the stick filtration the distinguished cell is the deepest one; on
    the dyadic filtration it is cell 0 and the blocks are the right halves
    along its ancestry.  The construction gives one cell whose path
    oscillates through the whole pattern while its maximal function stays
    at the pattern amplitude, so variation can exceed the maximal function
    by a factor near 2 * depth^(1/r).
    """
    closing = 2.0 * pattern[:depth] - pattern[1:]
    if filt_kind == "stick":
        terminal = np.empty(depth + 1)
        terminal[:depth] = closing
        terminal[depth] = pattern[depth]
    else:
        terminal = np.empty(1 << depth)
        for k in range(depth):
            terminal[1 << (depth - k - 1) : 1 << (depth - k)] = closing[k]
        terminal[0] = pattern[depth]
    if noise:
        terminal = terminal + noise * amp * rng.standard_normal(terminal.shape[0])
    return terminal


def build_martingale(manifest: dict, trial: int = 0) -> Martingale:
    """Deterministic martingale for trial `trial` of a generator manifest.

    Manifest keys: generator, depth, seed, filtration ("dyadic" default),
    and generator-specific params.  The stock generators defer to
    `random_martingale`; "oscillating" plants one cell whose level path
    alternates between +/- amplitude (high variation at small maximal
    function), with optional Gaussian jitter; it works on both stick and
    dyadic filtrations.
    """
    kind = manifest["generator"]
    depth = int(manifest["depth"])
    seed = _trial_seed(manifest.get("seed", 0), trial)
    filt_kind = manifest.get("filtration", "dyadic")
    filt = _suite_filtration(filt_kind, depth)
    params = manifest.get("params", {})
    if kind in ("terminal_gaussian", "uniform_terminal", "dyadic_rademacher"):
        f = random_martingale(
            filt,
            kind,
            seed,
            scale_schedule=params.get("scale_schedule"),
            scale=params.get("scale", 1.0),
        )
    elif kind == "oscillating":
        rng = np.random.default_rng([seed, zlib.crc32(b"oscillating")])
        amp = params.get("amplitude", 1.0) * (1.0 + params.get("amplitude_jitter", 0.0) * (2.0 * rng.random() - 1.0))
        pattern = amp * (-1.0) ** np.arange(depth + 1)
        f = from_terminal(filt, _oscillating_terminal(filt_kind, depth, pattern, params.get("noise", 0.0), amp, rng))
    else:
        raise ValueError(f"unknown generator {kind!r}")
    f.generator = {
        "generator": kind,
        "filtration": filt_kind,
        "depth": depth,
        "seed": int(manifest.get("seed", 0)),
        "trial": int(trial),
        "params": dict(params),
    }
    return f


# ---------------------------------------------------------------------------
# norm-ratio experiments


@dataclass
class ExperimentSummary:
    """Ratio distribution of one experiment over a seeded suite."""

    name: str
    params: dict
    manifest: dict
    trials: int
    excluded_zero: int
    ratios: list[float] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    @property
    def mean_ratio(self) -> float:
        return float(np.mean(self.ratios)) if self.ratios else 0.0

    def to_json(self) -> dict:
        return {
            "schema": "martvar.summary/1",
            "name": self.name,
            "params": self.params,
            "manifest": self.manifest,
            "trials": self.trials,
            "excluded_zero": self.excluded_zero,
            "max_ratio": self.max_ratio,
            "mean_ratio": self.mean_ratio,
            "ratios": self.ratios,
            "extra": self.extra,
        }


def lepingle_experiment(p: float, r: float, manifest: dict, trials: int) -> ExperimentSummary:
    """Ratio distribution ||V_r||_p / ||f_N||_p over a seeded suite.

    At p = 1 the statistic is the weak-type form: the maximum over a
    per-trial quantile grid of lam * nu{V_r > lam} / ||f_N||_1.
    Identically-zero martingales are excluded and counted.
    """
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    if not r > 2.0:
        raise ValueError(f"r must exceed 2, got {r}")
    if trials < 1:
        raise ValueError("trials must be positive")
    summary = ExperimentSummary(
        name="lepingle",
        params={"p": p, "r": r},
        manifest=dict(manifest),
        trials=trials,
        excluded_zero=0,
    )
    for t in range(trials):
        f = build_martingale(manifest, t)
        filt = f.filtration
        term = np.abs(f.terminal())
        denom = lp_norm(term, filt, p)
        if denom == 0.0:
            summary.excluded_zero += 1
            continue
        vr = variation_pointwise(f, r)
        if p > 1:
            summary.ratios.append(lp_norm(vr, filt, p) / denom)
        else:
            lams = np.unique(measure_quantiles(vr, filt, DEFAULT_QUANTILES))
            lams = lams[lams > 0]
            best = 0.0
            for lam in lams:
                best = max(best, lam * distribution(vr, filt, lam) / denom)
            summary.ratios.append(best)
    return summary


def lepingle_growth(p: float, r_grid, manifest: dict, trials: int) -> dict:
    """Max ratio per r over a fixed suite, with the least-squares
    coefficient of max_ratio against r/(r-2)."""
    r_grid = [float(r) for r in r_grid]
    maxima = [lepingle_experiment(p, r, manifest, trials).max_ratio for r in r_grid]
    x = np.array([r / (r - 2.0) for r in r_grid])
    y = np.array(maxima)
    coeff = float((x * y).sum() / (x * x).sum()) if (x * x).sum() > 0 else 0.0
    return {"p": p, "r_grid": r_grid, "max_ratios": maxima, "fitted_coefficient": coeff}


def jump_experiment(p: float, lambda_grid, manifest: dict, trials: int) -> ExperimentSummary:
    """Ratio distribution || lam * N_lam^(1/2) ||_p / ||f_N||_p over a
    lambda grid (per-trial quantiles of the maximal function if None);
    weak-type analogue at p = 1."""
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    summary = ExperimentSummary(
        name="jumps",
        params={"p": p, "lambda_grid": None if lambda_grid is None else [float(x) for x in lambda_grid]},
        manifest=dict(manifest),
        trials=trials,
        excluded_zero=0,
    )
    chain_pair_gap = 0.0
    for t in range(trials):
        f = build_martingale(manifest, t)
        filt = f.filtration
        denom = lp_norm(f.terminal(), filt, p)
        if denom == 0.0:
            summary.excluded_zero += 1
            continue
        if lambda_grid is None:
            lams = np.unique(measure_quantiles(maximal(f), filt, (0.25, 0.5, 0.75)))
            lams = lams[lams > 0]
        else:
            lams = np.asarray(lambda_grid, dtype=float)
        best = 0.0
        for lam in lams:
            counts = jump_count_pointwise(f, lam)
            jump_field = lam * np.sqrt(counts)
            if p > 1:
                best = max(best, lp_norm(jump_field, filt, p) / denom)
            else:
                for tq in np.unique(measure_quantiles(jump_field, filt, DEFAULT_QUANTILES)):
                    if tq > 0:
                        best = max(best, tq * distribution(jump_field, filt, tq) / denom)
        summary.ratios.append(best)
    summary.extra["chain_pair_gap"] = chain_pair_gap
    return summary


def bdg_experiment(p: float, manifest: dict, trials: int) -> ExperimentSummary:
    """Two-sided maximal/square ratios plus the convexity-side ratio
    (conditional square over square for p >= 2, maximal over conditional
    square for p < 2)."""
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    summary = ExperimentSummary(
        name="bdg",
        params={"p": p},
        manifest=dict(manifest),
        trials=trials,
        excluded_zero=0,
    )
    m_over_s, s_over_m, convexity = [], [], []
    for t in range(trials):
        f = build_martingale(manifest, t)
        filt = f.filtration
        m_norm = lp_norm(maximal(f), filt, p)
        s_norm = lp_norm(square(f), filt, p)
        if m_norm == 0.0 or s_norm == 0.0:
            summary.excluded_zero += 1
            continue
        m_over_s.append(m_norm / s_norm)
        s_over_m.append(s_norm / m_norm)
        cs_norm = lp_norm(conditional_square(f), filt, p)
        if p >= 2:
            convexity.append(cs_norm / s_norm)
        else:
            convexity.append(m_norm / cs_norm if cs_norm > 0 else math.inf)
        summary.ratios.append(m_over_s[-1])
    summary.extra = {
        "max_maximal_over_square": max(m_over_s, default=0.0),
        "max_square_over_maximal": max(s_over_m, default=0.0),
        "convexity_ratios_max": max(convexity, default=0.0),
        "convexity_kind": "cond_square_over_square" if p >= 2 else "maximal_over_cond_square",
    }
    return summary


# ---------------------------------------------------------------------------
# adversarial search


@dataclass
class SearchResult:
    """Best objective found, with a manifest that replays it exactly."""

    best_objective: float
    manifest: dict
    evaluations: int

    def to_json(self) -> dict:
        return {
            "schema": "martvar.search/1",
            "best_objective": self.best_objective,
            "manifest": self.manifest,
            "evaluations": self.evaluations,
        }


def _search_objective(objective: str, params: dict):
    depth = int(params.get("depth", 8))
    filt = _suite_filtration(params.get("filtration", "dyadic"), depth)
    p = float(params.get("p", 2.0))

    if objective == "lepingle_ratio":
        r = float(params.get("r", 3.0))

        def fn(terminal):
            f = from_terminal(filt, terminal)
            denom = lp_norm(f.terminal(), filt, p)
            return 0.0 if denom == 0.0 else lp_norm(variation_pointwise(f, r), filt, p) / denom

    elif objective == "jump_ratio":
        lam = float(params.get("lam", 0.5))

        def fn(terminal):
            f = from_terminal(filt, terminal)
            denom = lp_norm(f.terminal(), filt, p)
            if denom == 0.0:
                return 0.0
            counts = jump_count_pointwise(f, lam)
            return lp_norm(lam * np.sqrt(counts), filt, p) / denom

    elif objective == "good_lambda_constant":
        r = float(params.get("r", 3.0))
        delta = float(params.get("delta", 0.4))

        def fn(terminal):
            f = from_terminal(filt, terminal)
            fields = operator_fields(f, r)
            lams = np.unique(measure_quantiles(fields["variation"], filt, DEFAULT_QUANTILES))
            lams = lams[lams > 0]
            best = 0.0
            for lam in lams:
                rep = verify_good_lambda(f, delta, r, float(lam), 1.0, fields=fields)
                if math.isfinite(rep.empirical_constant):
                    best = max(best, rep.empirical_constant)
            return best

    else:
        raise ValueError(f"unknown search objective {objective!r}")
    return fn, filt


def adversarial_search(objective: str, params: dict, budget: int, seed: int) -> SearchResult:
    """Random restarts plus coordinate-wise hill climbing on the terminal.

    Half the budget probes fresh Gaussian terminals; the rest climbs from
    the best probe by single-coordinate perturbations, accepting only
    improvements, with the step shrinking after sustained rejection.  The
    result is deterministic in the seed and never below the best probe.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    fn, filt = _search_objective(objective, params)
    cells = filt.num_cells
    probes = max(1, budget // 2)
    best_val = -math.inf
    best_restart = 0
    evals = 0
    for k in range(probes):
        if evals >= budget:
            break
        x = np.random.default_rng([int(seed), 0xA11CE, k]).standard_normal(cells)
        val = fn(x)
        evals += 1
        if val > best_val:
            best_val, best_restart = val, k
    x = np.random.default_rng([int(seed), 0xA11CE, best_restart]).standard_normal(cells)
    climb_rng = np.random.default_rng([int(seed), 0xC111B])
    step = 0.5
    rejected = 0
    trace: list[list] = []
    while evals < budget:
        coord = int(climb_rng.integers(cells))
        delta = step * float(climb_rng.standard_normal())
        x[coord] += delta
        val = fn(x)
        evals += 1
        if val > best_val:
            best_val = val
            trace.append([coord, delta])
            rejected = 0
        else:
            x[coord] -= delta
            rejected += 1
            if rejected >= 16:
                step *= 0.5
                rejected = 0
    manifest = {
        "objective": objective,
        "params": dict(params),
        "seed": int(seed),
        "restart": int(best_restart),
        "trace": trace,
    }
    return SearchResult(best_objective=float(best_val), manifest=manifest, evaluations=evals)


def replay_search(manifest: dict) -> float:
    """Re-evaluate a search manifest: rebuild the winning probe terminal,
    apply the accepted perturbations, return the objective."""
    fn, filt = _search_objective(manifest["objective"], manifest["params"])
    x = np.random.default_rng([int(manifest["seed"]), 0xA11CE, int(manifest["restart"])]).standard_normal(
        filt.num_cells
    )
    for coord, delta in manifest["trace"]:
        x[int(coord)] += delta
    return float(fn(x))
