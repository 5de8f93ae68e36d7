"""Finite measure spaces carrying nested partitions.

A filtration here is a finite cell set with strictly positive cell masses
and, for each level 0..N, a partition of the cells into atoms such that
every level-(n+1) atom sits inside exactly one level-n atom.  Conditional
expectation, the regularity ratio and validation diagnostics all operate
on this representation.  Instances are immutable after construction and
safe to share across threads.
"""

from __future__ import annotations

import json

import numpy as np

__all__ = [
    "Filtration",
    "dyadic_filtration",
    "stick_filtration",
    "random_filtration",
    "validate",
    "validate_parts",
    "conditional_expectation",
    "regularity_constant",
    "filtration_to_json",
    "filtration_from_json",
]

FILTRATION_SCHEMA = "martvar.filtration/1"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


class Filtration:
    """Nested partitions of a finite cell set with positive cell masses.

    Parameters
    ----------
    cell_measure : positive mass per finest cell.
    levels : for each level 0..depth, a list of atoms, each atom an
        iterable of cell indices.
    check : validate the invariants on construction (default True).
    """

    def __init__(self, cell_measure, levels, check: bool = True):
        self.cell_measure = _freeze(np.asarray(cell_measure, dtype=float).copy())
        self.num_cells = self.cell_measure.shape[0]
        self.depth = len(levels) - 1
        self.levels = tuple(
            tuple(_freeze(np.asarray(sorted(atom), dtype=np.intp)) for atom in level)
            for level in levels
        )
        if check:
            problems = validate_parts(self.cell_measure, self.levels)
            if problems:
                raise ValueError("invalid filtration: " + "; ".join(problems))
        self._build_tables()

    def _build_tables(self):
        # atom_index[n][cell] -> atom position within level n; -1 if uncovered.
        self.atom_index = []
        self.atom_measure = []
        for level in self.levels:
            idx = np.full(self.num_cells, -1, dtype=np.intp)
            meas = np.empty(len(level), dtype=float)
            for a, atom in enumerate(level):
                idx[atom] = a
                meas[a] = self.cell_measure[atom].sum()
            self.atom_index.append(_freeze(idx))
            self.atom_measure.append(_freeze(meas))
        # parent[n][a] -> index of the level-(n-1) atom containing atom a.
        self.parent = [None]
        for n in range(1, self.depth + 1):
            first_cells = np.array([atom[0] for atom in self.levels[n]], dtype=np.intp)
            self.parent.append(_freeze(self.atom_index[n - 1][first_cells]))

    @property
    def total_measure(self) -> float:
        return float(self.cell_measure.sum())

    def atoms(self, level: int):
        return self.levels[level]

    def expand(self, level: int, atom_values: np.ndarray) -> np.ndarray:
        """Broadcast per-atom values of a level to a per-cell field."""
        return np.asarray(atom_values, dtype=float)[self.atom_index[level]]

    def average(self, level: int, field: np.ndarray) -> np.ndarray:
        """Measure-weighted mean of a per-cell field on each level atom."""
        sums = np.bincount(
            self.atom_index[level],
            weights=self.cell_measure * np.asarray(field, dtype=float),
            minlength=len(self.levels[level]),
        )
        return sums / self.atom_measure[level]

    def __eq__(self, other):
        if not isinstance(other, Filtration):
            return NotImplemented
        return (
            self.depth == other.depth
            and np.array_equal(self.cell_measure, other.cell_measure)
            and all(
                len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))
                for a, b in zip(self.levels, other.levels)
            )
        )

    def __repr__(self):
        return f"Filtration(depth={self.depth}, cells={self.num_cells})"


def dyadic_filtration(depth: int) -> Filtration:
    """Binary splitting of the unit interval down to 2^depth equal cells."""
    if not 0 <= depth <= 24:
        raise ValueError(f"dyadic depth must be in 0..24, got {depth}")
    cells = 1 << depth
    measure = np.full(cells, 2.0 ** -depth)
    levels = []
    for n in range(depth + 1):
        block = 1 << (depth - n)
        levels.append([range(a * block, (a + 1) * block) for a in range(1 << n)])
    return Filtration(measure, levels)


def stick_filtration(depth: int) -> Filtration:
    """Stick-breaking filtration: each level halves the remaining atom.

    Level n splits the rightmost atom into cell n (mass 2^-(n+1)) and the
    remainder; every split is an equal-measure binary split, so the
    Rademacher generator applies.  depth+1 cells total, so deep levels are
    cheap: per-cell paths have up to `depth` nonzero increments.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth == 0:
        measure = np.array([1.0])
        cells = 1
    else:
        # Cell k (peeled at level k+1) carries 2^-(k+1); the last cell matches its sibling.
        measure = np.array([2.0 ** -(k + 1) for k in range(depth)] + [2.0 ** -depth])
        cells = depth + 1
    levels = []
    for n in range(depth + 1):
        atoms = [[k] for k in range(n)]
        atoms.append(range(n, cells))
        levels.append(atoms)
    return Filtration(measure, levels)


def random_filtration(depth: int, max_cells: int, seed: int) -> Filtration:
    """Random nested partition with random positive cell masses.

    Grows the partition level by level, splitting a random subset of atoms
    into two nonempty pieces; atoms may also carry over unchanged.
    """
    if depth < 0 or max_cells < 1:
        raise ValueError("depth must be >= 0 and max_cells >= 1")
    rng = np.random.default_rng([int(seed), 0x5EED])
    measure = rng.uniform(0.2, 1.8, size=max_cells)
    order = rng.permutation(max_cells)
    levels = [[list(order)]]
    for _ in range(depth):
        prev = levels[-1]
        nxt = []
        for atom in prev:
            if len(atom) > 1 and rng.random() < 0.7:
                cut = int(rng.integers(1, len(atom)))
                nxt.append(list(atom[:cut]))
                nxt.append(list(atom[cut:]))
            else:
                nxt.append(list(atom))
        levels.append(nxt)
    return Filtration(measure, levels)


def validate_parts(cell_measure, levels) -> list[str]:
    """Invariant diagnostics for raw (cell_measure, levels) data.

    Returns an empty list when the partition, positivity and refinement
    invariants all hold; otherwise one message per violation, naming the
    offending level and atom.
    """
    problems = []
    measure = np.asarray(cell_measure, dtype=float)
    cells = measure.shape[0]
    bad_mass = np.flatnonzero(~(measure > 0.0))
    for c in bad_mass:
        problems.append(f"positivity: cell {c} has non-positive measure {measure[c]}")
    for n, level in enumerate(levels):
        seen = np.zeros(cells, dtype=np.intp)
        for a, atom in enumerate(level):
            atom = np.asarray(list(atom), dtype=np.intp)
            if atom.size == 0:
                problems.append(f"partition: level {n} atom {a} is empty")
                continue
            if atom.min() < 0 or atom.max() >= cells:
                problems.append(f"partition: level {n} atom {a} has out-of-range cells")
                continue
            seen[atom] += 1
        missing = np.flatnonzero(seen == 0)
        dup = np.flatnonzero(seen > 1)
        if missing.size:
            problems.append(f"partition: level {n} misses cells {missing.tolist()[:8]}")
        if dup.size:
            problems.append(f"partition: level {n} covers cells {dup.tolist()[:8]} more than once")
    # Refinement only meaningful where partitions are sound.
    for n in range(1, len(levels)):
        cell_to_parent = np.full(cells, -1, dtype=np.intp)
        for a, atom in enumerate(levels[n - 1]):
            cell_to_parent[np.asarray(list(atom), dtype=np.intp)] = a
        for a, atom in enumerate(levels[n]):
            atom = np.asarray(list(atom), dtype=np.intp)
            parents = np.unique(cell_to_parent[atom])
            if parents.size > 1:
                problems.append(
                    f"refinement: level {n} atom {a} straddles level-{n - 1} atoms {parents.tolist()}"
                )
    return problems


def validate(filtration: Filtration) -> list[str]:
    """Diagnostics for a constructed Filtration (empty list = all good)."""
    return validate_parts(filtration.cell_measure, filtration.levels)


def conditional_expectation(field, level: int, filtration: Filtration) -> np.ndarray:
    """Project a per-cell field onto the level's atoms by weighted averaging.

    Output is constant on each level atom and integrates to the same total
    as the input.
    """
    if not 0 <= level <= filtration.depth:
        raise ValueError(f"level must be in 0..{filtration.depth}, got {level}")
    return filtration.expand(level, filtration.average(level, field))


def regularity_constant(filtration: Filtration) -> float:
    """Worst parent/child measure ratio R*.

    Every nonnegative martingale g on the filtration satisfies
    g_n <= R* g_{n-1} pointwise, and indicators of a minimizing child
    attain the ratio; both facts are exercised by the test suite rather
    than assumed.
    """
    if filtration.depth == 0:
        return 1.0
    worst = 1.0
    for n in range(1, filtration.depth + 1):
        ratio = filtration.atom_measure[n - 1][filtration.parent[n]] / filtration.atom_measure[n]
        worst = max(worst, float(ratio.max()))
    return worst


def filtration_to_json(filtration: Filtration) -> dict:
    return {
        "schema": FILTRATION_SCHEMA,
        "depth": filtration.depth,
        "cell_measure": filtration.cell_measure.tolist(),
        "levels": [[atom.tolist() for atom in level] for level in filtration.levels],
    }


def filtration_from_json(obj: dict) -> Filtration:
    if obj.get("schema") != FILTRATION_SCHEMA:
        raise ValueError(f"unsupported filtration schema: {obj.get('schema')!r}")
    filt = Filtration(obj["cell_measure"], obj["levels"])
    if filt.depth != obj["depth"]:
        raise ValueError("depth field disagrees with levels table")
    return filt


def load_filtration(path) -> Filtration:
    with open(path) as fh:
        return filtration_from_json(json.load(fh))
