"""Space-group machinery: operation detection, orbits, reconstruction, labels.

Operations act on fractional columns (``frac' = W @ frac + t``) and an
integer matrix ``W`` is admissible only when it preserves the metric,
``W.T @ G @ W == G`` with ``G`` the Gram matrix of the lattice rows.
"""

from __future__ import annotations

import itertools
import re
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .core import (Crystal, IrreducibleAtom, LatticeParameters, SymmetryOperation,
                   gram_matrix, min_image_delta, quantize_ticks, wrap_frac)
from .errors import GroupClosureFailure, OrbitInconsistency, ParseError, SpeciesClash

DEFAULT_SYMPREC = 0.01
METRIC_RTOL = 1e-5
DEDUP_TOL = 1e-4      # fractional tolerance when merging reconstructed sites
_TWELFTHS = [Fraction(k, 12) for k in range(12)]


@lru_cache(maxsize=2)
def _unimodular_candidates(bound: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integer 3x3 matrices with entries in [-bound, bound] and det +-1.

    Returns (int matrices, float copies, transposed float copies); the float
    views are cached so the per-call metric filter is two batched matmuls.
    """
    values = np.arange(-bound, bound + 1, dtype=np.int64)
    grids = np.meshgrid(*([values] * 9), indexing="ij")
    flat = np.stack([g.ravel() for g in grids], axis=1).reshape(-1, 3, 3)
    dets = np.linalg.det(flat.astype(float))
    kept = np.ascontiguousarray(flat[np.abs(np.abs(dets) - 1.0) < 0.5])
    as_float = kept.astype(float)
    return kept, as_float, np.ascontiguousarray(np.transpose(as_float, (0, 2, 1)))


def metric_rotations(lattice, bound: int = 1) -> np.ndarray:
    """Integer matrices W with W.T G W == G for the lattice's Gram matrix G."""
    gram = gram_matrix(lattice)
    candidates, as_float, transposed = _unimodular_candidates(bound)
    transformed = transposed @ gram @ as_float
    tol = METRIC_RTOL * np.abs(gram).max()
    keep = np.all(np.abs(transformed - gram) <= tol, axis=(1, 2))
    return candidates[keep]


def _match_permutation(images: np.ndarray, frac: np.ndarray, species: np.ndarray,
                       tol: float) -> np.ndarray | None:
    """Bijective species-preserving match of image rows onto atom rows, or None."""
    delta = images[:, None, :] - frac[None, :, :]
    delta -= np.round(delta)
    close = np.linalg.norm(delta, axis=2) <= tol
    close &= species[:, None] == species[None, :]
    if not (np.all(close.sum(axis=1) == 1) and np.all(close.sum(axis=0) == 1)):
        return None
    return np.argmax(close, axis=1)


def _operation_maps(crystal: Crystal, rotation: np.ndarray, translation: np.ndarray,
                    symprec: float) -> bool:
    images = wrap_frac(crystal.frac_positions @ rotation.T.astype(float) + translation)
    return _match_permutation(images, crystal.frac_positions, crystal.species, symprec) is not None


def _collect_operations(crystal: Crystal, rotations: np.ndarray,
                        symprec: float) -> list[SymmetryOperation]:
    frac = crystal.frac_positions
    zs, counts = np.unique(crystal.species, return_counts=True)
    rare_z = zs[counts == counts.min()].min()
    anchors = np.flatnonzero(crystal.species == rare_z)
    ops: list[SymmetryOperation] = []
    for rotation in rotations:
        rot_f = rotation.astype(float)
        seen: list[np.ndarray] = []
        for a, b in itertools.product(anchors, anchors):
            t = wrap_frac(frac[a] - rot_f @ frac[b])
            if any(np.linalg.norm(min_image_delta(t, prev)) <= symprec for prev in seen):
                continue
            seen.append(t)
            if _operation_maps(crystal, rotation, t, symprec):
                ops.append(SymmetryOperation(rotation, t))
    return ops


def _closure_holds(ops: list[SymmetryOperation], symprec: float) -> bool:
    if not any(op.is_identity() for op in ops):
        return False
    index = {}
    for i, op in enumerate(ops):
        index.setdefault(tuple(op.rotation.ravel()), []).append(i)
    for op1, op2 in itertools.product(ops, ops):
        rot = op1.rotation @ op2.rotation
        tr = wrap_frac(op1.rotation.astype(float) @ op2.translation + op1.translation)
        members = index.get(tuple(rot.ravel()), ())
        if not any(np.linalg.norm(min_image_delta(tr, ops[m].translation)) <= 2 * symprec
                   for m in members):
            return False
    return True


def detect_operations(crystal: Crystal, symprec: float = DEFAULT_SYMPREC) -> list[SymmetryOperation]:
    """All space-group operations of a (reduced, primitive) cell.

    Candidate rotation parts are metric-preserving integer matrices with
    entries in {-1, 0, 1}; the search escalates to {-2..2} if the detected set
    fails group closure.  Candidate translations pair atoms of the least
    frequent species.  The result is sorted by the canonical operation order.

    Raises
    ------
    GroupClosureFailure
        If no entry bound yields a closed set; retry with a smaller symprec.
    """
    for bound in (1, 2):
        rotations = metric_rotations(crystal.lattice, bound)
        ops = _collect_operations(crystal, rotations, symprec)
        if _closure_holds(ops, symprec):
            return sorted(ops, key=lambda op: op.sort_key())
    raise GroupClosureFailure(
        f"operation set not closed at symprec={symprec}; retry with a smaller tolerance")


def extract_irreducible(crystal: Crystal, ops: list[SymmetryOperation],
                        symprec: float = DEFAULT_SYMPREC) -> list[IrreducibleAtom]:
    """One representative per orbit of the atom set under ``ops``.

    The representative is the orbit member minimal under the canonical atom
    ordering key; multiplicity is the orbit size.
    """
    frac = crystal.frac_positions
    n = crystal.n
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for op in ops:
        images = wrap_frac(frac @ op.rotation.T.astype(float) + op.translation)
        perm = _match_permutation(images, frac, crystal.species, symprec)
        if perm is None:
            raise OrbitInconsistency("an operation does not permute the atom set")
        for i, j in enumerate(perm):
            ri, rj = find(i), find(int(j))
            if ri != rj:
                parent[ri] = rj

    orbits: dict[int, list[int]] = {}
    for i in range(n):
        orbits.setdefault(find(i), []).append(i)
    result = []
    for members in orbits.values():
        if len(ops) % len(members) != 0:
            raise OrbitInconsistency(
                f"orbit size {len(members)} does not divide group order {len(ops)}")
        rep = min(members, key=lambda i: (tuple(quantize_ticks(c) for c in frac[i]),
                                          tuple(frac[i])))
        result.append(IrreducibleAtom(int(crystal.species[rep]), frac[rep], len(members)))
    result.sort(key=lambda a: (a.z, -a.multiplicity,
                               tuple(quantize_ticks(c) for c in a.frac)))
    return result


def expand_orbit(frac, ops: list[SymmetryOperation], tol: float = DEDUP_TOL) -> np.ndarray:
    """Distinct images of one fractional position under ``ops`` (self included)."""
    points = [wrap_frac(np.asarray(frac, dtype=float))]
    for op in ops:
        image = op.apply(frac)
        if not any(np.linalg.norm(min_image_delta(image, p)) <= tol for p in points):
            points.append(image)
    return np.array(points)


def reconstruct_full_cell(irreducible: list[IrreducibleAtom], ops: list[SymmetryOperation],
                          tol: float = DEDUP_TOL) -> list[tuple[int, np.ndarray]]:
    """Expand irreducible atoms through the operation set, merging duplicates.

    Merging two sites of different species raises ``SpeciesClash``.
    """
    sites: list[tuple[int, np.ndarray]] = []
    for atom in irreducible:
        for image in expand_orbit(atom.frac, ops, tol):
            clash = False
            for z, existing in sites:
                if np.linalg.norm(min_image_delta(image, existing)) <= tol:
                    if z != atom.z:
                        raise SpeciesClash(
                            f"species {z} and {atom.z} deduplicate to the same site")
                    clash = True
                    break
            if not clash:
                sites.append((atom.z, image))
    return sites


# -- space-group labelling ----------------------------------------------------

_ROTATION_TYPE = {
    (1, 3): 1, (1, -1): 2, (1, 0): 3, (1, 1): 4, (1, 2): 6,
    (-1, -3): -1, (-1, 1): -2, (-1, 0): -3, (-1, -1): -4, (-1, -2): -6,
}

# Fingerprints that identify a space group unambiguously; everything else
# falls back to the generic "G<order>" label.
_FINGERPRINT_LABELS = {
    (1, ((1, 1),), False, False): "P1",
    (2, ((-1, 1), (1, 1)), True, False): "P-1",
}


def _rotation_order(rotation: np.ndarray) -> int:
    acc = np.eye(3, dtype=np.int64)
    for power in range(1, 13):
        acc = acc @ rotation
        if np.array_equal(acc, np.eye(3, dtype=np.int64)):
            return power
    raise ValueError("rotation part is not of finite crystallographic order")


def _has_intrinsic_translation(op: SymmetryOperation) -> bool:
    order = _rotation_order(op.rotation)
    acc = np.zeros(3)
    power = np.eye(3)
    for _ in range(order):
        acc += power @ op.translation
        power = power @ op.rotation.astype(float)
    intrinsic = min_image_delta(acc / order, 0.0)
    return bool(np.linalg.norm(intrinsic) > 1e-6)


def operation_fingerprint(ops: list[SymmetryOperation]):
    """(order, rotation-type multiset, centrosymmetric?, screw/glide present?)."""
    types: dict[int, int] = {}
    centro = False
    screw_or_glide = False
    for op in ops:
        det = int(round(np.linalg.det(op.rotation.astype(float))))
        trace = int(op.rotation.trace())
        rot_type = _ROTATION_TYPE[(det, trace)]
        types[rot_type] = types.get(rot_type, 0) + 1
        if np.array_equal(op.rotation, -np.eye(3, dtype=np.int64)):
            centro = True
        if abs(rot_type) >= 2 and _has_intrinsic_translation(op):
            screw_or_glide = True
    return (len(ops), tuple(sorted(types.items())), centro, screw_or_glide)


def classify_space_group(ops: list[SymmetryOperation], params: LatticeParameters) -> str:
    """Best-effort Hermann-Mauguin label; ``G<order>`` when not fingerprint-unique.

    The label is informative metadata only: reconstruction always relies on the
    explicit operation list, never on the symbol.
    """
    fingerprint = operation_fingerprint(ops)
    return _FINGERPRINT_LABELS.get(fingerprint, f"G{len(ops)}")


# -- xyz-triplet wire format ---------------------------------------------------

_AXES = "xyz"
_TERM_RE = re.compile(r"([+-]?)(\d+(?:/\d+)?|\d*\.\d+)?([xyz])?")


def _translation_text(value: float) -> str:
    for frac in _TWELFTHS:
        if abs(value - float(frac)) <= 1e-4:
            if frac == 0:
                return ""
            return f"{frac.numerator}/{frac.denominator}"
    if abs(value - 1.0) <= 1e-4:
        return ""
    return f"{value:.4f}"


def operation_to_triplet(op: SymmetryOperation) -> str:
    """Render an operation as an xyz triplet, e.g. ``-y,x,z+1/2``."""
    parts = []
    for row, t in zip(op.rotation, op.translation):
        terms = []
        for coef, axis in zip(row, _AXES):
            coef = int(coef)
            if coef == 0:
                continue
            magnitude = axis if abs(coef) == 1 else f"{abs(coef)}{axis}"
            terms.append(("-" if coef < 0 else "+") + magnitude)
        shift = _translation_text(float(t))
        if shift:
            terms.append("+" + shift)
        text = "".join(terms)
        parts.append(text[1:] if text.startswith("+") else text)
    return ",".join(parts)


def triplet_to_operation(text: str, line: int = 1) -> SymmetryOperation:
    """Parse an xyz triplet (``-x,y+1/2,z`` style) into an operation."""
    components = text.replace(" ", "").lower().split(",")
    if len(components) != 3:
        raise ParseError(f"expected 3 comma-separated terms in {text!r}", line,
                         expected="xyz triplet")
    rotation = np.zeros((3, 3), dtype=np.int64)
    translation = np.zeros(3)
    for i, component in enumerate(components):
        if not component:
            raise ParseError(f"empty triplet component in {text!r}", line)
        pos = 0
        while pos < len(component):
            match = _TERM_RE.match(component, pos)
            if not match or match.end() == pos:
                raise ParseError(f"cannot parse {component[pos:]!r} in triplet {text!r}",
                                 line, column=pos + 1)
            sign_text, number, axis = match.groups()
            sign = -1 if sign_text == "-" else 1
            if axis:
                coef = 1 if number is None else (
                    int(Fraction(number)) if "/" in number else int(float(number)))
                rotation[i, _AXES.index(axis)] += sign * coef
            elif number is not None:
                value = float(Fraction(number)) if "/" in number else float(number)
                translation[i] += sign * value
            else:
                raise ParseError(f"dangling sign in triplet {text!r}", line, column=pos + 1)
            pos = match.end()
    return SymmetryOperation(rotation, wrap_frac(translation))
