"""Dyadic weights: doubling diagnostics, small-set concentration profiles,
and the weighted good-lambda verifier.

A weight is a strictly positive density per finest cell of a dyadic
filtration.  Atom masses are always aggregated bottom-up (parent = left
child + right child), so additivity holds bitwise, not just to rounding.
The concentration profile records, for each Lebesgue budget gamma, the
largest weight fraction a subset of at most gamma |I| can capture inside
any dyadic interval I; at fixed depth the extremal subset is a union of
finest cells filled greedily by descending density.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .filtration import Filtration
from .martingale import Martingale, first_variation_exceed, proof_sets
from .operators import distribution, maximal, square, variation_pointwise

__all__ = [
    "DyadicWeight",
    "AInftyProfile",
    "cascade_weight",
    "atom_masses",
    "doubling_constant",
    "ainfty_profile",
    "weighted_distribution",
    "verify_weighted_good_lambda",
    "weight_to_json",
    "weight_from_json",
]

WEIGHT_SCHEMA = "martvar.weight/1"

DEFAULT_GAMMA_GRID = tuple((k + 1) / 32 for k in range(31))


@dataclass(frozen=True)
class DyadicWeight:
    """Strictly positive density per finest cell of a depth-d dyadic grid."""

    depth: int
    density: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.density, dtype=float).copy()
        if arr.shape[0] != 1 << self.depth:
            raise ValueError(f"depth {self.depth} needs {1 << self.depth} densities, got {arr.shape[0]}")
        if not (arr > 0).all():
            raise ValueError("weight densities must be strictly positive")
        arr.flags.writeable = False
        object.__setattr__(self, "density", arr)

    def cell_mass(self) -> np.ndarray:
        """Per-cell weight mass (density times Lebesgue cell size)."""
        return self.density * 2.0 ** -self.depth

    def total_mass(self) -> float:
        return float(self.cell_mass().sum())


def _require_dyadic(w: DyadicWeight, filtration: Filtration):
    if filtration.num_cells != 1 << filtration.depth or any(
        len(level) != 1 << n for n, level in enumerate(filtration.levels)
    ):
        raise ValueError("operation requires the standard dyadic filtration")
    if w.depth != filtration.depth:
        raise ValueError(f"weight depth {w.depth} differs from filtration depth {filtration.depth}")


def cascade_weight(depth: int, rho_max: float, seed: int) -> DyadicWeight:
    """Multiplicative cascade: each split sends the parent density to
    (1 + s*rho) and (1 - s*rho) with rho uniform in [0, rho_max) and an
    independent sign, so sibling masses stay within the doubling ratio
    (1 + rho_max) / (1 - rho_max).  Deterministic in the seed.
    """
    if not 0.0 <= rho_max < 1.0:
        raise ValueError(f"rho_max must lie in [0, 1), got {rho_max}")
    if not 0 <= depth <= 24:
        raise ValueError(f"depth must be in 0..24, got {depth}")
    rng = np.random.default_rng([int(seed), 0xCA5CADE])
    level = np.array([1.0])
    for n in range(depth):
        rho = rng.uniform(0.0, rho_max, size=level.shape[0]) if rho_max > 0 else np.zeros(level.shape[0])
        sign = rng.integers(0, 2, size=level.shape[0]) * 2 - 1
        children = np.empty(2 * level.shape[0])
        children[0::2] = level * (1.0 + sign * rho)
        children[1::2] = level * (1.0 - sign * rho)
        level = children
    return DyadicWeight(depth, level)


def atom_masses(w: DyadicWeight, filtration: Filtration) -> list[np.ndarray]:
    """Weight mass of every atom, aggregated bottom-up so that each parent
    mass is exactly the sum of its children's masses."""
    _require_dyadic(w, filtration)
    masses = [w.cell_mass()]
    while masses[-1].shape[0] > 1:
        prev = masses[-1]
        masses.append(prev[0::2] + prev[1::2])
    masses.reverse()
    return masses


def doubling_constant(w: DyadicWeight, filtration: Filtration) -> float:
    """Worst sibling mass ratio max(w(left)/w(right), w(right)/w(left))."""
    masses = atom_masses(w, filtration)
    worst = 1.0
    for level in masses[1:]:
        ratio = level[0::2] / level[1::2]
        worst = max(worst, float(ratio.max()), float((1.0 / ratio).max()))
    return worst


@dataclass(frozen=True)
class AInftyProfile:
    """Small-set concentration: for each gamma, the sup over dyadic
    intervals I of the weight fraction captured by the heaviest cells of
    Lebesgue share at most gamma."""

    gammas: np.ndarray
    epsilons: np.ndarray

    def epsilon_for(self, gamma: float) -> float:
        i = int(np.searchsorted(self.gammas, gamma))
        if i >= self.gammas.shape[0] or self.gammas[i] != gamma:
            raise KeyError(f"gamma {gamma} not on the profile grid")
        return float(self.epsilons[i])

    def max_gamma_with_epsilon_at_most(self, eps: float) -> float | None:
        ok = np.flatnonzero(self.epsilons <= eps)
        return float(self.gammas[ok[-1]]) if ok.size else None


def ainfty_profile(w: DyadicWeight, filtration: Filtration, gammas=DEFAULT_GAMMA_GRID) -> AInftyProfile:
    """Exact concentration profile over all dyadic intervals.

    Within an interval all cells have equal Lebesgue size, so the
    extremal subset for budget floor(gamma * count) cells is the greedy
    fill by descending density (exchange argument at cell granularity).
    """
    _require_dyadic(w, filtration)
    gam = np.asarray(sorted(gammas), dtype=float)
    if gam.size == 0 or gam[0] <= 0.0 or gam[-1] >= 1.0:
        raise ValueError("gamma grid must lie strictly inside (0, 1)")
    eps = np.zeros_like(gam)
    cellm = w.cell_mass()
    for n in range(filtration.depth + 1):
        count = 1 << (filtration.depth - n)
        rows = np.sort(cellm.reshape(1 << n, count), axis=1)[:, ::-1]
        prefix = np.hstack([np.zeros((1 << n, 1)), np.cumsum(rows, axis=1)])
        totals = prefix[:, -1]
        # floor with a one-ulp guard: dyadic gammas hit integers exactly
        ks = np.floor(gam * count + 1e-9).astype(int)
        for i, k in enumerate(ks):
            if k > 0:
                eps[i] = max(eps[i], float((prefix[:, k] / totals).max()))
    return AInftyProfile(gam, eps)


def weighted_distribution(
    field,
    w: DyadicWeight,
    threshold: float,
    mode: str = "strict",
    subset: np.ndarray | None = None,
) -> float:
    """Total weight mass of {field > threshold} (or >=) within a subset."""
    v = np.asarray(field, dtype=float)
    if mode == "strict":
        mask = v > threshold
    elif mode == "non_strict":
        mask = v >= threshold
    else:
        raise ValueError(f"mode must be 'strict' or 'non_strict', got {mode!r}")
    if subset is not None:
        mask = mask & np.asarray(subset, dtype=bool)
    return float(w.cell_mass()[mask].sum())


def verify_weighted_good_lambda(
    f: Martingale,
    w: DyadicWeight,
    epsilon: float,
    r: float,
    lam: float,
    c_budget: float,
    lemma_constant: float,
    delta: float | None = None,
    profile: AInftyProfile | None = None,
):
    """Check the weighted distributional inequality

        w{V_r > 3 lam, M < delta lam}
            <= c_budget * w{S > delta lam} + epsilon * w{V_r > lam}

    with delta derived from the concentration profile: the largest gamma
    with profile epsilon(gamma) <= epsilon admits any delta satisfying
    lemma_constant * delta^2 / (r-2)^2 <= gamma.  If no grid gamma
    qualifies, the report flags it and checks nothing.  The report also
    carries the per-stop-level Lebesgue containment ratios
    |{V_r > 3 lam, M < delta lam, good, stop = m}| / |{stop = m}| against
    the admissibility bound.
    """
    from .inequalities import VerificationReport

    filt = f.filtration
    _require_dyadic(w, filt)
    if not r > 2:
        raise ValueError(f"r must exceed 2, got {r}")
    if lam <= 0 or c_budget < 0 or epsilon <= 0 or lemma_constant <= 0:
        raise ValueError("lam, epsilon and lemma_constant must be positive, c_budget nonnegative")
    if profile is None:
        profile = ainfty_profile(w, filt)
    gamma = profile.max_gamma_with_epsilon_at_most(epsilon)
    params = {
        "epsilon": float(epsilon),
        "r": float(r),
        "lambda": float(lam),
        "C_budget": float(c_budget),
        "lemma_constant": float(lemma_constant),
        "depth": filt.depth,
        "tolerance": 1e-12,
    }
    if gamma is None:
        params["admissible"] = 0.0
        return VerificationReport(
            name="weighted_good_lambda",
            lhs=0.0,
            rhs=0.0,
            empirical_constant=0.0,
            params=params,
            passed=True,
        )
    params["admissible"] = 1.0
    params["gamma"] = gamma
    delta_max = math.sqrt(gamma * (r - 2.0) ** 2 / lemma_constant)
    if delta is None:
        delta = min(delta_max, 0.499)
    params["delta_max"] = delta_max
    params["delta"] = float(delta)
    if not 0.0 < delta < 0.5:
        raise ValueError(f"derived delta {delta} escapes (0, 1/2); supply one explicitly")

    vr = variation_pointwise(f, r)
    m_field = maximal(f)
    s_field = square(f)
    lhs = weighted_distribution(vr, w, 3.0 * lam, subset=m_field < delta * lam)
    ws = weighted_distribution(s_field, w, delta * lam)
    wv = weighted_distribution(vr, w, lam)
    rhs = (c_budget * ws if ws > 0.0 else 0.0) + epsilon * wv

    # Lebesgue containment per stop level, the mechanism the weighted bound rests on.
    sigma = first_variation_exceed(f, r, lam)
    sets = proof_sets(f, min(delta, 0.499), threshold=delta * lam)
    event = (vr > 3.0 * lam) & (m_field < delta * lam) & sets.good
    bound = lemma_constant * delta ** 2 / (r - 2.0) ** 2
    worst_ratio = 0.0
    for m in range(filt.depth + 2):
        stop = sigma.levels == m
        denom = distribution(np.ones(filt.num_cells), filt, 0.5, subset=stop)
        if denom == 0.0:
            continue
        num = distribution(np.ones(filt.num_cells), filt, 0.5, subset=event & stop)
        worst_ratio = max(worst_ratio, num / denom)
    params["containment_max_ratio"] = worst_ratio
    params["containment_bound"] = bound

    tol = params["tolerance"]
    passed = lhs <= rhs + tol
    if rhs > 0:
        empirical = lhs / rhs
    else:
        empirical = 0.0 if lhs <= 0 else math.inf
    return VerificationReport(
        name="weighted_good_lambda",
        lhs=lhs,
        rhs=rhs,
        empirical_constant=empirical,
        params=params,
        passed=passed,
    )


def weight_to_json(w: DyadicWeight) -> dict:
    return {"schema": WEIGHT_SCHEMA, "depth": w.depth, "density": w.density.tolist()}


def weight_from_json(obj: dict) -> DyadicWeight:
    if obj.get("schema") != WEIGHT_SCHEMA:
        raise ValueError(f"unsupported weight schema: {obj.get('schema')!r}")
    return DyadicWeight(int(obj["depth"]), obj["density"])


def load_weight(path) -> DyadicWeight:
    with open(path) as fh:
        return weight_from_json(json.load(fh))
