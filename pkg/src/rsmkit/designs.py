"""Two-level factorial, fractional factorial, first-order and central composite
designs, with coded/natural unit conversion and alias analysis.

All generators are deterministic: identical inputs produce identical run
orderings (standard Yates order for the factorial portion, axial points in
factor order, center points last). Factor letters follow the usual DoE
convention A, B, C, ... skipping I, which is reserved for the identity column.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

FACTOR_LETTERS = "ABCDEFGHJKLMNOPQRSTUVWXYZ"  # no I: identity

POINT_TYPES = ("factorial", "center", "axial", "path")


@dataclass(frozen=True)
class Factor:
    """A continuous experimental factor with natural-unit bounds.

    Coded -1 maps to ``low``, coded +1 maps to ``high``.
    """

    name: str
    low: float
    high: float
    units: str = ""

    def __post_init__(self):
        if not self.name:
            raise ValueError("factor name must be non-empty")
        if not self.low < self.high:
            raise ValueError(f"factor {self.name!r}: low must be < high "
                             f"(got {self.low}, {self.high})")

    @property
    def center(self) -> float:
        return 0.5 * (self.low + self.high)

    @property
    def half_range(self) -> float:
        return 0.5 * (self.high - self.low)


@dataclass(frozen=True)
class DesignPoint:
    run_id: int
    coded: tuple
    natural: tuple
    point_type: str

    def __post_init__(self):
        if self.point_type not in POINT_TYPES:
            raise ValueError(f"unknown point_type {self.point_type!r}")
        if self.run_id < 1:
            raise ValueError("run_id must be >= 1")


@dataclass(frozen=True)
class Design:
    """An ordered set of runs over a common factor list."""

    factors: tuple
    points: tuple

    def __post_init__(self):
        ids = [p.run_id for p in self.points]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("run_ids must be contiguous from 1")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def k(self) -> int:
        return len(self.factors)

    @property
    def factor_names(self) -> tuple:
        return tuple(f.name for f in self.factors)

    def coded_matrix(self) -> np.ndarray:
        return np.array([p.coded for p in self.points], dtype=float)

    def natural_matrix(self) -> np.ndarray:
        return np.array([p.natural for p in self.points], dtype=float)

    def point_types(self) -> list:
        return [p.point_type for p in self.points]

    def to_frame(self, coded: bool = False) -> pd.DataFrame:
        mat = self.coded_matrix() if coded else self.natural_matrix()
        df = pd.DataFrame(mat, columns=list(self.factor_names))
        df.insert(0, "run_id", [p.run_id for p in self.points])
        df.insert(1, "pt_type", self.point_types())
        return df

    def to_csv(self, path) -> None:
        """Write natural-unit CSV plus an adjacent ``*.coded.csv`` variant."""
        path = Path(path)
        self.to_frame(coded=False).to_csv(path, index=False)
        coded_path = path.with_suffix(".coded" + path.suffix)
        self.to_frame(coded=True).to_csv(coded_path, index=False)


def design_from_frame(df: pd.DataFrame, factors, coded: bool = False) -> Design:
    """Rebuild a Design from a CSV frame (schema: run_id, pt_type, factors...)."""
    factors = tuple(factors)
    names = [f.name for f in factors]
    missing = [n for n in names if n not in df.columns]
    if missing:
        raise ValueError(f"design frame is missing factor columns: {missing}")
    mat = df[names].to_numpy(dtype=float)
    coded_mat = mat if coded else np.array([natural_to_code(factors, row) for row in mat])
    nat_mat = np.array([code_to_natural(factors, row) for row in coded_mat])
    pt_types = df["pt_type"].tolist() if "pt_type" in df.columns else ["factorial"] * len(df)
    points = tuple(
        DesignPoint(run_id=i + 1, coded=tuple(coded_mat[i]), natural=tuple(nat_mat[i]),
                    point_type=pt_types[i])
        for i in range(len(df))
    )
    return Design(factors=factors, points=points)


def read_design_csv(path, factors, coded: bool = False) -> Design:
    return design_from_frame(pd.read_csv(path), factors, coded=coded)


@dataclass(frozen=True)
class FractionalFactorialSpec:
    """Bookkeeping for a 2^(k-p) fraction: generators, defining relation, resolution."""

    k: int
    p: int
    generators: tuple          # e.g. ("G=ABCD", "H=ABEF")
    defining_relation: tuple   # all words I is equal to, sorted
    resolution: int

    @property
    def n_runs(self) -> int:
        return 2 ** (self.k - self.p)


@dataclass(frozen=True)
class CCDSpec:
    k: int
    n_c: int
    alpha: float
    alpha_mode: str

    @property
    def n_runs(self) -> int:
        return 2 ** self.k + 2 * self.k + self.n_c


def code_to_natural(factors, coded) -> np.ndarray:
    """Map coded coordinates to natural units: x = center + coded * half_range."""
    factors = tuple(factors)
    coded = np.asarray(coded, dtype=float)
    if coded.shape != (len(factors),):
        raise ValueError(f"coded vector length {coded.shape} != {len(factors)} factors")
    centers = np.array([f.center for f in factors])
    halves = np.array([f.half_range for f in factors])
    return centers + coded * halves


def natural_to_code(factors, natural) -> np.ndarray:
    """Inverse of :func:`code_to_natural`: coded = (natural - center) / half_range."""
    factors = tuple(factors)
    natural = np.asarray(natural, dtype=float)
    if natural.shape != (len(factors),):
        raise ValueError(f"natural vector length {natural.shape} != {len(factors)} factors")
    centers = np.array([f.center for f in factors])
    halves = np.array([f.half_range for f in factors])
    if np.any(halves == 0):
        raise ValueError("factor half-range must be nonzero")
    return (natural - centers) / halves


def _points_from_coded(factors, coded_rows, pt_types, start_id: int = 1):
    points = []
    for i, (row, pt) in enumerate(zip(coded_rows, pt_types)):
        nat = code_to_natural(factors, row)
        points.append(DesignPoint(run_id=start_id + i, coded=tuple(np.asarray(row, float)),
                                  natural=tuple(nat), point_type=pt))
    return points


def _yates_matrix(k: int) -> np.ndarray:
    """2^k rows of +/-1 in standard order: first column alternates fastest."""
    n = 2 ** k
    cols = []
    for j in range(k):
        period = 2 ** j
        col = np.tile(np.repeat([-1.0, 1.0], period), n // (2 * period))
        cols.append(col)
    return np.column_stack(cols)


def full_factorial(factors) -> Design:
    """2^k full factorial in standard (Yates) order."""
    factors = tuple(factors)
    k = len(factors)
    if k == 0:
        raise ValueError("factor list must be non-empty")
    if k > 16:
        raise ValueError("full factorial limited to k <= 16")
    coded = _yates_matrix(k)
    points = _points_from_coded(factors, coded, ["factorial"] * len(coded))
    return Design(factors=factors, points=tuple(points))


def _word_to_set(word: str, letters: str) -> frozenset:
    s = set()
    for ch in word:
        if ch not in letters:
            raise ValueError(f"unknown factor letter {ch!r} in word {word!r}")
        if ch in s:
            raise ValueError(f"repeated letter {ch!r} in word {word!r}")
        s.add(ch)
    return frozenset(s)


def _set_to_word(s, letters: str) -> str:
    return "".join(ch for ch in letters if ch in s)


def _parse_generators(generators, k: int, p: int):
    """Parse generator words like 'G=ABCD' (or bare 'ABCD' assigned in order).

    Each generator defines one of the last p factor letters as a product of
    base-factor letters (the first k-p letters).
    """
    letters = FACTOR_LETTERS[:k]
    base = set(letters[: k - p])
    targets_expected = list(letters[k - p:])
    parsed = {}
    for gi, gen in enumerate(generators):
        gen = gen.replace(" ", "").upper()
        if "=" in gen:
            target, word = gen.split("=", 1)
            if len(target) != 1:
                raise ValueError(f"generator target must be a single letter: {gen!r}")
        else:
            target, word = targets_expected[gi], gen
        if target not in targets_expected:
            raise ValueError(f"generator target {target!r} must be one of the last "
                             f"{p} factors {targets_expected}")
        if target in parsed:
            raise ValueError(f"duplicate generator target {target!r}")
        wset = _word_to_set(word, letters)
        if not wset <= base:
            bad = sorted(wset - base)
            raise ValueError(f"generator {target}={word} references non-base "
                             f"factor(s) {bad}; words must use only the first "
                             f"{k - p} factors")
        parsed[target] = wset
    if len(parsed) != p:
        raise ValueError(f"expected {p} generators, got {len(parsed)}")
    return parsed, letters


def _defining_relation(parsed: dict, letters: str) -> list:
    """Closure of the defining words {target + word} under symmetric difference."""
    defining = [frozenset(w | {t}) for t, w in sorted(parsed.items())]
    words = {frozenset()}
    for d in defining:
        words |= {w ^ d for w in words}
    words.discard(frozenset())
    return sorted(words, key=lambda w: (len(w), _set_to_word(w, letters)))


def fractional_factorial(factors, p: int, generators=None):
    """2^(k-p) fractional factorial; returns (Design, FractionalFactorialSpec).

    The last p factors are generated as products of base-factor columns. With
    ``generators=None`` and k=8, p=2 the default defining words are G=ABCD and
    H=ABEF (a resolution V quarter fraction).
    """
    factors = tuple(factors)
    k = len(factors)
    if k == 0:
        raise ValueError("factor list must be non-empty")
    if p < 0 or p >= k:
        raise ValueError(f"need 0 <= p < k, got p={p}, k={k}")
    if p == 0:
        design = full_factorial(factors)
        spec = FractionalFactorialSpec(k=k, p=0, generators=(),
                                       defining_relation=(), resolution=math.inf)
        return design, spec

    if generators is None:
        if (k, p) == (8, 2):
            generators = ("G=ABCD", "H=ABEF")
        else:
            raise ValueError("generators must be given explicitly except for k=8, p=2")
    parsed, letters = _parse_generators(generators, k, p)

    base_coded = _yates_matrix(k - p)
    cols = {letters[i]: base_coded[:, i] for i in range(k - p)}
    for target in letters[k - p:]:
        word = parsed[target]
        col = np.ones(len(base_coded))
        for ch in word:
            col = col * cols[ch]
        cols[target] = col
    coded = np.column_stack([cols[ch] for ch in letters])

    relation = _defining_relation(parsed, letters)
    resolution = min(len(w) for w in relation)
    spec = FractionalFactorialSpec(
        k=k, p=p,
        generators=tuple(f"{t}={_set_to_word(w, letters)}" for t, w in sorted(parsed.items())),
        defining_relation=tuple(_set_to_word(w, letters) for w in relation),
        resolution=resolution,
    )
    points = _points_from_coded(factors, coded, ["factorial"] * len(coded))
    return Design(factors=factors, points=tuple(points)), spec


def alias_structure(spec: FractionalFactorialSpec, max_order: int = 2) -> dict:
    """Alias sets for every effect word up to ``max_order``.

    The aliases of an effect E are the products E*W over all defining-relation
    words W, with squared letters cancelling. A full factorial (empty defining
    relation) has all alias sets empty.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    letters = FACTOR_LETTERS[: spec.k]
    relation = [_word_to_set(w, letters) for w in spec.defining_relation]
    out = {}
    for order in range(1, max_order + 1):
        for combo in itertools.combinations(letters, order):
            eff = frozenset(combo)
            aliases = {eff ^ w for w in relation}
            aliases.discard(eff)
            out[_set_to_word(eff, letters)] = {
                _set_to_word(a, letters) for a in aliases if a
            }
    return out


def first_order_design(factors, n_c: int = 3) -> Design:
    """Orthogonal first-order design: 2^k factorial points plus n_c centers."""
    if n_c < 1:
        raise ValueError("n_c must be >= 1")
    factors = tuple(factors)
    base = full_factorial(factors)
    k = len(factors)
    centers = _points_from_coded(factors, np.zeros((n_c, k)), ["center"] * n_c,
                                 start_id=len(base) + 1)
    return Design(factors=factors, points=base.points + tuple(centers))


def central_composite(factors, n_c: int = 3, alpha_mode: str = "rotatable",
                      alpha: float | None = None):
    """Central composite design; returns (Design, CCDSpec).

    Rotatable mode sets the axial distance to (2^k)^(1/4); face-centered mode
    sets it to 1 so all points stay inside the +/-1 cube.
    """
    if n_c < 1:
        raise ValueError("n_c must be >= 1")
    factors = tuple(factors)
    k = len(factors)
    n_f = 2 ** k
    if alpha_mode == "rotatable":
        a = n_f ** 0.25
    elif alpha_mode == "face_centered":
        a = 1.0
    elif alpha_mode == "custom":
        if alpha is None or alpha <= 0:
            raise ValueError("custom alpha_mode requires alpha > 0")
        a = float(alpha)
    else:
        raise ValueError(f"unknown alpha_mode {alpha_mode!r}")

    base = full_factorial(factors)
    axial_rows = []
    for i in range(k):
        for sign in (-1.0, 1.0):
            row = np.zeros(k)
            row[i] = sign * a
            axial_rows.append(row)
    axial = _points_from_coded(factors, axial_rows, ["axial"] * (2 * k),
                               start_id=n_f + 1)
    centers = _points_from_coded(factors, np.zeros((n_c, k)), ["center"] * n_c,
                                 start_id=n_f + 2 * k + 1)
    design = Design(factors=factors, points=base.points + tuple(axial) + tuple(centers))
    return design, CCDSpec(k=k, n_c=n_c, alpha=a, alpha_mode=alpha_mode)
