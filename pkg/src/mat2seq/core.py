"""Domain types for periodic structures plus coordinate conversions.

Conventions used throughout the package:

* lattices are 3x3 matrices whose *rows* are the lattice vectors in angstrom,
* fractional coordinates are row vectors, so ``cartesian = frac @ lattice``,
* symmetry operations act on fractional columns, ``frac' = R @ frac + t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np

from .elements import MAX_ATOMIC_NUMBER
from .errors import DegenerateLattice

MIN_CELL_VOLUME = 1e-8       # |det| below this is a degenerate cell
MIN_GRAM_DETERMINANT = 1e-10  # realizability bound for an angle triple
_UNIT_SNAP = 1e-8             # fractional values this close to 1.0 collapse to 0.0

QUANT_DECIMALS = 4
QUANT_TICKS = 10 ** QUANT_DECIMALS


def wrap_frac(values) -> np.ndarray:
    """Wrap fractional coordinates into [0, 1), snapping near-1 values to 0."""
    arr = np.asarray(values, dtype=float)
    wrapped = arr - np.floor(arr)
    wrapped[np.abs(wrapped - 1.0) <= _UNIT_SNAP] = 0.0
    return wrapped


_SNAP_GRID = Decimal("1e-9")


def quantize_ticks(x: float) -> int:
    """Round-half-up ``x`` onto the 1e-4 sequence grid, returned in integer ticks.

    Decimal arithmetic on the shortest float repr keeps ordering keys and the
    rendered text in agreement.  Values are first snapped to a 1e-9 grid so
    that inputs stored with finitely many decimals (CIF files) quantize
    identically across float computation paths even when they land exactly on
    a 1e-4 half-way boundary.
    """
    snapped = Decimal(repr(float(x))).quantize(_SNAP_GRID, rounding=ROUND_HALF_UP)
    return int(snapped.scaleb(QUANT_DECIMALS).to_integral_value(rounding=ROUND_HALF_UP))


def integer_inverse(matrix) -> np.ndarray:
    """Exact inverse of an integer matrix with det = +-1."""
    m = np.asarray(matrix)
    inv = np.rint(np.linalg.inv(m.astype(float))).astype(np.int64)
    if not np.array_equal(m.astype(np.int64) @ inv, np.eye(3, dtype=np.int64)):
        raise ValueError("matrix is not unimodular")
    return inv


@dataclass(frozen=True, eq=False)
class Crystal:
    """A unit cell: atomic numbers, fractional positions, lattice rows."""

    species: np.ndarray         # (n,) int, atomic numbers 1..103
    frac_positions: np.ndarray  # (n, 3) float in [0, 1)
    lattice: np.ndarray         # (3, 3) float, rows are lattice vectors in angstrom

    def __post_init__(self):
        species = np.atleast_1d(np.asarray(self.species, dtype=np.int64))
        frac = np.atleast_2d(np.asarray(self.frac_positions, dtype=float))
        lattice = np.asarray(self.lattice, dtype=float)
        if species.ndim != 1 or species.size == 0:
            raise ValueError("species must be a non-empty 1-d sequence")
        if frac.shape != (species.size, 3):
            raise ValueError(f"frac_positions shape {frac.shape} does not match {species.size} species")
        if lattice.shape != (3, 3):
            raise ValueError("lattice must be a 3x3 matrix")
        if np.any(species < 1) or np.any(species > MAX_ATOMIC_NUMBER):
            raise ValueError(f"atomic numbers must lie in 1..{MAX_ATOMIC_NUMBER}")
        if abs(np.linalg.det(lattice)) <= MIN_CELL_VOLUME:
            raise DegenerateLattice("lattice vectors are collinear or coplanar")
        frac = wrap_frac(frac)
        for name, value in (("species", species), ("frac_positions", frac), ("lattice", lattice)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return int(self.species.size)

    @property
    def volume(self) -> float:
        return float(abs(np.linalg.det(self.lattice)))

    def with_positions(self, frac_positions) -> "Crystal":
        return Crystal(self.species, frac_positions, self.lattice)


@dataclass(frozen=True)
class LatticeParameters:
    """The six rotation-invariant cell parameters."""

    a: float
    b: float
    c: float
    alpha: float  # deg
    beta: float   # deg
    gamma: float  # deg

    def __post_init__(self):
        for name in ("a", "b", "c"):
            if not getattr(self, name) > 0:
                raise DegenerateLattice(f"lattice length {name} must be positive")
        for name in ("alpha", "beta", "gamma"):
            if not 0 < getattr(self, name) < 180:
                raise DegenerateLattice(f"lattice angle {name} must lie in (0, 180)")
        if self.gram_determinant() <= MIN_GRAM_DETERMINANT:
            raise DegenerateLattice("angle triple does not describe a realizable 3-d cell")

    def gram_determinant(self) -> float:
        ca, cb, cg = (math.cos(math.radians(v)) for v in (self.alpha, self.beta, self.gamma))
        return 1.0 + 2.0 * ca * cb * cg - ca * ca - cb * cb - cg * cg

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.a, self.b, self.c, self.alpha, self.beta, self.gamma)


@dataclass(frozen=True, eq=False)
class SymmetryOperation:
    """Space-group operation: integer rotation part plus fractional translation."""

    rotation: np.ndarray     # (3, 3) int, fractional basis
    translation: np.ndarray  # (3,) float in [0, 1)

    def __post_init__(self):
        rotation = np.asarray(self.rotation)
        if rotation.shape != (3, 3) or not np.allclose(rotation, np.rint(rotation)):
            raise ValueError("rotation must be a 3x3 integer matrix")
        rotation = np.rint(rotation).astype(np.int64)
        det = int(round(np.linalg.det(rotation.astype(float))))
        if det not in (1, -1):
            raise ValueError(f"rotation determinant must be +-1, got {det}")
        translation = wrap_frac(np.asarray(self.translation, dtype=float).reshape(3))
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.rotation, np.eye(3, dtype=np.int64))
                    and np.all(np.abs(self.translation) < 1e-10))

    def apply(self, frac) -> np.ndarray:
        """Image of fractional coordinates under this operation, wrapped to [0, 1)."""
        frac = np.asarray(frac, dtype=float)
        if frac.ndim == 1:
            return wrap_frac(self.rotation @ frac + self.translation)
        return wrap_frac(frac @ self.rotation.T + self.translation)

    def sort_key(self):
        return (tuple(int(v) for v in self.rotation.ravel()),
                tuple(quantize_ticks(t) for t in self.translation))


@dataclass(frozen=True, eq=False)
class IrreducibleAtom:
    """One orbit representative: species, position, and orbit size."""

    z: int
    frac: np.ndarray
    multiplicity: int

    def __post_init__(self):
        if not 1 <= self.z <= MAX_ATOMIC_NUMBER:
            raise ValueError(f"atomic number {self.z} out of range")
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be >= 1")
        frac = wrap_frac(np.asarray(self.frac, dtype=float).reshape(3))
        frac.setflags(write=False)
        object.__setattr__(self, "frac", frac)


@dataclass(frozen=True, eq=False)
class CanonicalCell:
    """The invariant primitive cell: parameters, ordered atoms, ordered operations."""

    params: LatticeParameters
    atoms: tuple[IrreducibleAtom, ...]
    operations: tuple[SymmetryOperation, ...]
    formula: str
    space_group_label: str

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "operations", tuple(self.operations))
        if not self.atoms:
            raise ValueError("canonical cell needs at least one atom")
        if not self.operations:
            raise ValueError("canonical cell needs at least the identity operation")

    @property
    def n_atoms(self) -> int:
        """Atom count of the full cell (sum of multiplicities)."""
        return sum(a.multiplicity for a in self.atoms)


@dataclass(frozen=True)
class CrystalSequence:
    """Grammar-conformant sequence text plus its token-id stream."""

    text: str
    tokens: tuple[int, ...]

    def __post_init__(self):
        if not self.text.endswith("\n"):
            raise ValueError("sequence text must be newline-terminated")
        object.__setattr__(self, "tokens", tuple(self.tokens))


def frac_to_cart(crystal: Crystal, index: int) -> np.ndarray:
    """Cartesian position of atom ``index``: x*l1 + y*l2 + z*l3."""
    if not 0 <= index < crystal.n:
        raise IndexError(f"atom index {index} out of range 0..{crystal.n - 1}")
    return crystal.frac_positions[index] @ crystal.lattice


def params_from_lattice(lattice) -> LatticeParameters:
    """Six invariant parameters (lengths in angstrom, angles in degrees)."""
    lattice = np.asarray(lattice, dtype=float)
    if abs(np.linalg.det(lattice)) <= MIN_CELL_VOLUME:
        raise DegenerateLattice("lattice vectors are collinear or coplanar")
    lengths = np.linalg.norm(lattice, axis=1)
    l1, l2, l3 = lattice

    def angle(u, v):
        cos = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
        return math.degrees(math.acos(min(1.0, max(-1.0, cos))))

    return LatticeParameters(
        a=float(lengths[0]), b=float(lengths[1]), c=float(lengths[2]),
        alpha=angle(l2, l3), beta=angle(l1, l3), gamma=angle(l1, l2),
    )


def lattice_from_params(params: LatticeParameters) -> np.ndarray:
    """Rebuild lattice rows in the fixed orientation convention.

    l1 points along +x, l2 lies in the xy-plane with positive y component and
    l3 has a positive z component, so the rows form a right-handed system.
    """
    ca, cb, cg = (math.cos(math.radians(v)) for v in (params.alpha, params.beta, params.gamma))
    sg = math.sin(math.radians(params.gamma))
    cy = (ca - cb * cg) / sg
    cz_sq = 1.0 - cb * cb - cy * cy
    if cz_sq <= 0:
        raise DegenerateLattice("angle triple does not describe a realizable 3-d cell")
    lattice = np.array([
        [params.a, 0.0, 0.0],
        [params.b * cg, params.b * sg, 0.0],
        [params.c * cb, params.c * cy, params.c * math.sqrt(cz_sq)],
    ])
    return lattice


def gram_matrix(lattice) -> np.ndarray:
    """Pairwise dot products of the lattice rows."""
    lattice = np.asarray(lattice, dtype=float)
    return lattice @ lattice.T


def min_image_delta(frac_a, frac_b) -> np.ndarray:
    """Componentwise fractional difference wrapped into [-0.5, 0.5)."""
    delta = np.asarray(frac_a, dtype=float) - np.asarray(frac_b, dtype=float)
    return delta - np.round(delta)


def reduced_formula(species: Sequence[int]) -> str:
    """Composition string with counts divided by their gcd, elements by ascending Z."""
    from .elements import symbol_for

    counts: dict[int, int] = {}
    for z in np.asarray(species).tolist():
        counts[int(z)] = counts.get(int(z), 0) + 1
    divisor = math.gcd(*counts.values())
    parts = []
    for z in sorted(counts):
        reduced = counts[z] // divisor
        parts.append(symbol_for(z) + (str(reduced) if reduced > 1 else ""))
    return "".join(parts)
