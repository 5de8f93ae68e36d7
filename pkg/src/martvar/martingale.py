"""Martingales on finite filtrations and the stopped/truncated transforms.

Values are stored per level per atom, so adaptedness holds by
representation; the martingale property is checked on construction.
Levels run 0..N with differences defined for n = 1..N, i.e. the level-0
value plays the role of the starting value of a two-sided process.

Alongside the constructors this module builds the objects the
good-lambda verification machinery consumes: the first time the prefix
variation exceeds a threshold, the tail f - f_stopped after that time,
the core/halo/good/calm cell sets derived from a conditional square
function threshold, and the difference transform truncated to the calm
sets.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .filtration import Filtration
from .operators import conditional_square

__all__ = [
    "Martingale",
    "StoppingTime",
    "ProofSets",
    "from_terminal",
    "random_martingale",
    "martingale_residual",
    "validate_martingale",
    "first_variation_exceed",
    "stopped_tail",
    "halo_set",
    "proof_sets",
    "truncated_transform",
    "martingale_to_json",
    "martingale_from_json",
]

MARTINGALE_SCHEMA = "martvar.martingale/1"

RESIDUAL_TOL = 1e-10


class Martingale:
    """Adapted sequence of per-atom values satisfying the tower identity.

    values[n][a] is the value on atom a of level n.  Construction checks
    the martingale property to RESIDUAL_TOL unless check=False.
    """

    def __init__(self, filtration: Filtration, values, check: bool = True, generator: dict | None = None):
        self.filtration = filtration
        vals = []
        for n, level_values in enumerate(values):
            arr = np.asarray(level_values, dtype=float).copy()
            if arr.shape[0] != len(filtration.levels[n]):
                raise ValueError(f"level {n} expects {len(filtration.levels[n])} atom values, got {arr.shape[0]}")
            arr.flags.writeable = False
            vals.append(arr)
        if len(vals) != filtration.depth + 1:
            raise ValueError(f"expected {filtration.depth + 1} levels of values, got {len(vals)}")
        self.values = tuple(vals)
        self.generator = generator
        self._cell_matrix: np.ndarray | None = None
        if check:
            residual = martingale_residual(self)
            if residual > RESIDUAL_TOL:
                raise ValueError(f"martingale property violated: residual {residual:.3e}")

    @property
    def depth(self) -> int:
        return self.filtration.depth

    def cell_values(self, level: int) -> np.ndarray:
        return self.filtration.expand(level, self.values[level])

    def cell_matrix(self) -> np.ndarray:
        """Per-cell paths as an array of shape (depth+1, num_cells)."""
        if self._cell_matrix is None:
            mat = np.stack([self.cell_values(n) for n in range(self.depth + 1)])
            mat.flags.writeable = False
            self._cell_matrix = mat
        return self._cell_matrix

    def terminal(self) -> np.ndarray:
        return self.cell_values(self.depth)

    @staticmethod
    def from_cell_matrix(
        filtration: Filtration,
        matrix: np.ndarray,
        check: bool = True,
        generator: dict | None = None,
    ) -> "Martingale":
        """Build from per-cell level values; rows must be atom-constant."""
        matrix = np.asarray(matrix, dtype=float)
        values = []
        for n in range(filtration.depth + 1):
            firsts = np.array([atom[0] for atom in filtration.levels[n]], dtype=np.intp)
            vals = matrix[n][firsts]
            if check and not np.array_equal(vals[filtration.atom_index[n]], matrix[n]):
                raise ValueError(f"level {n} values are not constant on atoms")
            values.append(vals)
        return Martingale(filtration, values, check=check, generator=generator)

    def __repr__(self):
        return f"Martingale(depth={self.depth}, cells={self.filtration.num_cells})"


def martingale_residual(f: Martingale) -> float:
    """Largest relative defect of the tower identity across parent atoms."""
    worst = 0.0
    filt = f.filtration
    for n in range(1, filt.depth + 1):
        child_mass = filt.atom_measure[n] * f.values[n]
        agg = np.bincount(filt.parent[n], weights=child_mass, minlength=len(filt.levels[n - 1]))
        target = filt.atom_measure[n - 1] * f.values[n - 1]
        scale = np.maximum(1.0, np.maximum(np.abs(agg), np.abs(target)))
        worst = max(worst, float((np.abs(agg - target) / scale).max()))
    return worst


def validate_martingale(f: Martingale) -> list[str]:
    """Diagnostics: empty list iff the martingale property holds."""
    problems = []
    residual = martingale_residual(f)
    if residual > RESIDUAL_TOL:
        problems.append(f"martingale property residual {residual:.3e} exceeds {RESIDUAL_TOL}")
    return problems


def from_terminal(filtration: Filtration, terminal) -> Martingale:
    """Martingale of conditional averages of a per-cell terminal field."""
    terminal = np.asarray(terminal, dtype=float)
    if terminal.shape[0] != filtration.num_cells:
        raise ValueError(f"terminal must have {filtration.num_cells} entries, got {terminal.shape[0]}")
    values = [filtration.average(n, terminal) for n in range(filtration.depth + 1)]
    return Martingale(filtration, values)


def _rng(seed: int, *keys) -> np.random.Generator:
    words = [int(seed) & 0xFFFFFFFF]
    for k in keys:
        words.append(k if isinstance(k, int) else zlib.crc32(str(k).encode()))
    return np.random.default_rng(words)


def _binary_splits(filtration: Filtration, n: int):
    """Children of each level-(n-1) atom; error unless every atom carries
    over or splits into exactly two equal-measure children."""
    groups: list[list[int]] = [[] for _ in filtration.levels[n - 1]]
    for child, parent in enumerate(filtration.parent[n]):
        groups[parent].append(child)
    for parent, children in enumerate(groups):
        if len(children) == 1:
            continue
        if len(children) != 2:
            raise ValueError(f"level {n} atom {parent} splits into {len(children)} children, need 1 or 2")
        m1, m2 = (filtration.atom_measure[n][c] for c in children)
        if abs(m1 - m2) > 1e-12 * (m1 + m2):
            raise ValueError(f"level {n} atom {parent} has unequal child measures {m1} and {m2}")
    return groups


def random_martingale(
    filtration: Filtration,
    generator: str,
    seed: int,
    scale_schedule=None,
    scale: float = 1.0,
) -> Martingale:
    """Seeded martingale from one of the stock generators.

    terminal_gaussian and uniform_terminal draw a terminal field and
    condition it down; dyadic_rademacher walks the refinement tree,
    sending the two children of each split to parent +/- t_n with an
    independent sign (requires equal-measure binary splits).  The same
    (generator, seed) always reproduces the same martingale.
    """
    if generator == "terminal_gaussian":
        rng = _rng(seed, "terminal_gaussian")
        f = from_terminal(filtration, scale * rng.standard_normal(filtration.num_cells))
    elif generator == "uniform_terminal":
        rng = _rng(seed, "uniform_terminal")
        f = from_terminal(filtration, scale * rng.uniform(-1.0, 1.0, filtration.num_cells))
    elif generator == "dyadic_rademacher":
        rng = _rng(seed, "dyadic_rademacher")
        schedule = np.asarray(
            scale_schedule if scale_schedule is not None else np.ones(filtration.depth),
            dtype=float,
        )
        if schedule.shape[0] != filtration.depth:
            raise ValueError(f"scale schedule needs {filtration.depth} entries, got {schedule.shape[0]}")
        values = [np.zeros(len(filtration.levels[0]))]
        for n in range(1, filtration.depth + 1):
            groups = _binary_splits(filtration, n)
            level_vals = np.empty(len(filtration.levels[n]))
            for parent, children in enumerate(groups):
                v = values[n - 1][parent]
                if len(children) == 1:
                    level_vals[children[0]] = v
                else:
                    s = schedule[n - 1] * (1.0 if rng.integers(0, 2) else -1.0)
                    level_vals[children[0]] = v + s
                    level_vals[children[1]] = v - s
            values.append(level_vals)
        f = Martingale(filtration, values)
    else:
        raise ValueError(f"unknown generator {generator!r}")
    f.generator = {"generator": generator, "seed": int(seed), "scale": scale}
    if scale_schedule is not None:
        f.generator["scale_schedule"] = list(map(float, scale_schedule))
    return f


# ---------------------------------------------------------------------------
# stopping times


@dataclass(frozen=True)
class StoppingTime:
    """Per-cell stopping level in 0..depth, or depth+1 for 'never'."""

    levels: np.ndarray
    depth: int

    def __post_init__(self):
        arr = np.asarray(self.levels, dtype=np.intp).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "levels", arr)

    @property
    def never(self) -> int:
        return self.depth + 1

    def stopped_mask(self, m: int) -> np.ndarray:
        return self.levels == m

    def validate(self, filtration: Filtration) -> list[str]:
        """Measurability: {sigma = m} must be a union of level-m atoms;
        the never-set must be a union of finest atoms."""
        problems = []
        if self.depth != filtration.depth:
            return [f"stopping time depth {self.depth} differs from filtration depth {filtration.depth}"]
        if self.levels.min() < 0 or self.levels.max() > self.never:
            return [f"stop levels must lie in 0..{self.never}"]
        for m in range(self.depth + 2):
            level = min(m, self.depth)
            mask = self.levels == m
            if not mask.any():
                continue
            hit = np.unique(filtration.atom_index[level][mask])
            for a in hit:
                atom = filtration.levels[level][a]
                if not mask[atom].all():
                    problems.append(f"level-{m} stop set splits atom {a} of level {level}")
        return problems


def first_variation_exceed(f: Martingale, r: float, threshold: float) -> StoppingTime:
    """First level where the prefix r-variation strictly exceeds the
    threshold (never = depth+1).  Prefix values are atom-constant at the
    stopping level, so measurability is automatic; the validator checks
    it anyway in tests.
    """
    if r <= 1:
        raise ValueError(f"variation order must satisfy r > 1, got {r}")
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    a = f.cell_matrix()
    L, cells = a.shape
    sigma = np.full(cells, L, dtype=np.intp)  # L == depth+1 == never
    best = np.zeros((L, cells))
    vmax = np.zeros(cells)
    for m in range(1, L):
        best[m] = (best[:m] + np.abs(a[m] - a[:m]) ** r).max(axis=0)
        vmax = np.maximum(vmax, best[m])
        newly = (sigma == L) & (vmax ** (1.0 / r) > threshold)
        sigma[newly] = m
    return StoppingTime(sigma, f.depth)


def stopped_tail(f: Martingale, sigma: StoppingTime) -> Martingale:
    """The tail g with g_n = f_n - f_(n ^ sigma) per cell.

    Vanishes identically on {sigma >= n} (same arithmetic path, so the
    zeros are bitwise) and is a martingale by optional stopping.
    """
    problems = sigma.validate(f.filtration)
    if problems:
        raise ValueError("stopping time not measurable: " + "; ".join(problems))
    a = f.cell_matrix()
    L, cells = a.shape
    idx = np.minimum(np.arange(L)[:, None], sigma.levels[None, :])
    stopped = a[idx, np.arange(cells)[None, :]]
    return Martingale.from_cell_matrix(f.filtration, a - stopped)


# ---------------------------------------------------------------------------
# good-lambda proof constructions


@dataclass(frozen=True)
class ProofSets:
    """Cell sets steering the truncated difference transform.

    core: conditional square function above the threshold.
    halo: maximal function of the core indicator above 1/2.
    good: complement of the halo.
    calm[n]: cells whose level-n conditional core average is at most 1/2;
        good cells are calm at every level.
    """

    core: np.ndarray
    halo: np.ndarray
    good: np.ndarray
    calm: tuple[np.ndarray, ...]


def halo_set(mask: np.ndarray, filtration: Filtration) -> np.ndarray:
    """Cells where the maximal function of the indicator exceeds 1/2."""
    ind = from_terminal(filtration, np.asarray(mask, dtype=float))
    peak = np.abs(ind.cell_matrix()).max(axis=0)
    return peak > 0.5


def proof_sets(f: Martingale, delta: float, threshold: float | None = None) -> ProofSets:
    """Derive the core/halo/good/calm sets at conditional-square level
    `threshold` (defaults to delta, the unit-scale normalization).

    Calm sets use a non-strict 1/2 cutoff: with a strict one, a cell whose
    conditional core average equals 1/2 exactly would be good but not
    calm, and the good-on-calm containment the transform relies on would
    fail on sets of positive measure.
    """
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 1/2), got {delta}")
    thr = delta if threshold is None else float(threshold)
    s_field = conditional_square(f)
    core = s_field > thr
    filt = f.filtration
    ind = from_terminal(filt, core.astype(float))
    averages = ind.cell_matrix()
    halo = np.abs(averages).max(axis=0) > 0.5
    good = ~halo
    calm = tuple(averages[n] <= 0.5 for n in range(filt.depth + 1))
    for n, c in enumerate(calm):
        if (good & ~c).any():
            raise RuntimeError(f"good set escapes the calm set at level {n}")
    return ProofSets(core=core, halo=halo, good=good, calm=calm)


def truncated_transform(g: Martingale, sets: ProofSets) -> Martingale:
    """Transform with differences d_n masked by the level-(n-1) calm set.

    Starts at zero; each masked difference keeps conditional mean zero
    because the mask is measurable one level earlier, so the result is a
    martingale.  On good cells every mask is one and the transform
    reproduces g - g_0 exactly.
    """
    filt = g.filtration
    if len(sets.calm) != filt.depth + 1:
        raise ValueError(f"proof sets carry {len(sets.calm)} levels, martingale has {filt.depth + 1}")
    a = g.cell_matrix()
    diffs = np.diff(a, axis=0)
    masked = diffs * np.stack([sets.calm[n].astype(float) for n in range(filt.depth)])
    out = np.vstack([np.zeros((1, filt.num_cells)), np.cumsum(masked, axis=0)])
    return Martingale.from_cell_matrix(filt, out)


# ---------------------------------------------------------------------------
# serialization


def martingale_to_json(f: Martingale, filtration_inline: bool = True) -> dict:
    from .filtration import filtration_to_json

    obj = {
        "schema": MARTINGALE_SCHEMA,
        "values": [v.tolist() for v in f.values],
    }
    if f.generator is not None:
        obj["generator"] = f.generator
    if filtration_inline:
        obj["filtration"] = filtration_to_json(f.filtration)
    return obj


def martingale_from_json(obj: dict, filtration: Filtration | None = None) -> Martingale:
    from .filtration import filtration_from_json

    if obj.get("schema") != MARTINGALE_SCHEMA:
        raise ValueError(f"unsupported martingale schema: {obj.get('schema')!r}")
    if filtration is None:
        if "filtration" not in obj:
            raise ValueError("martingale file carries no filtration and none was supplied")
        filtration = filtration_from_json(obj["filtration"])
    return Martingale(filtration, obj["values"], generator=obj.get("generator"))
