"""Lattice canonicalization: Niggli cell reduction and primitive-cell extraction.

The reduction is the Krivy & Gruber (1975) step algorithm with the
epsilon-stabilised comparisons described by Grosse-Kunstleve, Sauter & Adams
(Acta Cryst. A60, 2004).  Every update is tracked as an integer change of
basis ``K`` so fractional coordinates can be remapped exactly.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Crystal, integer_inverse, min_image_delta, wrap_frac
from .errors import InconsistentSupercell, NonConvergence

MAX_REDUCTION_STEPS = 1000
EPS_SCALE = 1e-5  # comparisons use EPS_SCALE * volume**(1/3)

# Basis updates, rows express new vectors in terms of old: L' = M @ L.
_M_SWAP_AB = np.array([[0, -1, 0], [-1, 0, 0], [0, 0, -1]], dtype=np.int64)
_M_SWAP_BC = np.array([[-1, 0, 0], [0, 0, -1], [0, -1, 0]], dtype=np.int64)
_M_C_PLUS_ABC = np.array([[1, 0, 0], [0, 1, 0], [1, 1, 1]], dtype=np.int64)


def _eps_sign(value: float, eps: float) -> int:
    if value > eps:
        return 1
    if value < -eps:
        return -1
    return 0


def _sign_flip_matrix(want_xi: int, want_eta: int, want_zeta: int) -> np.ndarray:
    """diag(i, j, k) with det +1 scaling (xi, eta, zeta) by the wanted signs.

    The effect of diag(i, j, k) is xi *= j*k, eta *= i*k, zeta *= i*j; the
    wanted signs must multiply to +1, which the callers guarantee.
    """
    i, j, k = 1, want_zeta, want_eta
    if i * j * k == -1:
        i, j, k = -i, -j, -k
    assert j * k == want_xi and i * k == want_eta and i * j == want_zeta
    return np.diag([i, j, k]).astype(np.int64)


def niggli_reduce(crystal: Crystal) -> tuple[Crystal, np.ndarray]:
    """Re-express ``crystal`` in its Niggli-reduced, right-handed basis.

    Returns the reduced crystal together with the integer matrix ``K``
    (det +-1) satisfying ``reduced.lattice == K @ crystal.lattice``.
    """
    lattice = crystal.lattice
    k_total = np.eye(3, dtype=np.int64)
    if np.linalg.det(lattice) < 0:
        # A lattice is invariant under vector sign flips; make it right-handed
        # up front so the det +1 updates below preserve handedness.
        k_total = np.diag([1, 1, -1]).astype(np.int64)

    basis = k_total.astype(float) @ lattice
    volume = abs(np.linalg.det(basis))
    eps = EPS_SCALE * volume ** (1.0 / 3.0)

    a_vec, b_vec, c_vec = basis
    big_a = float(a_vec @ a_vec)
    big_b = float(b_vec @ b_vec)
    big_c = float(c_vec @ c_vec)
    xi = 2.0 * float(b_vec @ c_vec)
    eta = 2.0 * float(a_vec @ c_vec)
    zeta = 2.0 * float(a_vec @ b_vec)

    def gt(x, y):
        return x > y + eps

    def eq(x, y):
        return abs(x - y) <= eps

    k_step = np.eye(3, dtype=np.int64)
    for _ in range(MAX_REDUCTION_STEPS):
        # A1: order the first two vectors.
        if gt(big_a, big_b) or (eq(big_a, big_b) and gt(abs(xi), abs(eta))):
            big_a, big_b = big_b, big_a
            xi, eta = eta, xi
            k_step = _M_SWAP_AB @ k_step
        # A2: order the last two vectors, then start over.
        if gt(big_b, big_c) or (eq(big_b, big_c) and gt(abs(eta), abs(zeta))):
            big_b, big_c = big_c, big_b
            eta, zeta = zeta, eta
            k_step = _M_SWAP_BC @ k_step
            continue
        # A3/A4: fix the signs of the scalar products.
        signs = (_eps_sign(xi, eps), _eps_sign(eta, eps), _eps_sign(zeta, eps))
        if signs[0] * signs[1] * signs[2] == 1:
            want = tuple(-1 if s == -1 else 1 for s in signs)
            flip = _sign_flip_matrix(*want)
        else:
            want = [-1 if s == 1 else 1 for s in signs]
            if want[0] * want[1] * want[2] == -1:
                zero_slot = signs.index(0)  # exists whenever the parity is odd
                want[zero_slot] = -want[zero_slot]
            flip = _sign_flip_matrix(*want)
        xi *= flip[1, 1] * flip[2, 2]
        eta *= flip[0, 0] * flip[2, 2]
        zeta *= flip[0, 0] * flip[1, 1]
        k_step = flip @ k_step
        # A5: c' = c -+ b
        if gt(abs(xi), big_b) or (eq(xi, big_b) and gt(zeta, 2.0 * eta)) or (eq(xi, -big_b) and zeta < -eps):
            s = 1 if xi > 0 else -1
            big_c = big_b + big_c - xi * s
            eta = eta - zeta * s
            xi = xi - 2.0 * big_b * s
            k_step = np.array([[1, 0, 0], [0, 1, 0], [0, -s, 1]], dtype=np.int64) @ k_step
            continue
        # A6: c' = c -+ a
        if gt(abs(eta), big_a) or (eq(eta, big_a) and gt(zeta, 2.0 * xi)) or (eq(eta, -big_a) and zeta < -eps):
            s = 1 if eta > 0 else -1
            big_c = big_a + big_c - eta * s
            xi = xi - zeta * s
            eta = eta - 2.0 * big_a * s
            k_step = np.array([[1, 0, 0], [0, 1, 0], [-s, 0, 1]], dtype=np.int64) @ k_step
            continue
        # A7: b' = b -+ a
        if gt(abs(zeta), big_a) or (eq(zeta, big_a) and gt(eta, 2.0 * xi)) or (eq(zeta, -big_a) and eta < -eps):
            s = 1 if zeta > 0 else -1
            big_b = big_a + big_b - zeta * s
            xi = xi - eta * s
            zeta = zeta - 2.0 * big_a * s
            k_step = np.array([[1, 0, 0], [-s, 1, 0], [0, 0, 1]], dtype=np.int64) @ k_step
            continue
        # A8: c' = a + b + c
        total = xi + eta + zeta + big_a + big_b
        if total < -eps or (eq(total, 0.0) and gt(2.0 * (big_a + eta) + zeta, 0.0)):
            big_c = big_a + big_b + big_c + xi + eta + zeta
            xi = 2.0 * big_b + xi + zeta
            eta = 2.0 * big_a + eta + zeta
            k_step = _M_C_PLUS_ABC @ k_step
            continue
        break
    else:
        raise NonConvergence(f"Niggli reduction exceeded {MAX_REDUCTION_STEPS} steps")

    k_total = k_step @ k_total
    reduced_lattice = k_total.astype(float) @ lattice
    new_frac = wrap_frac(crystal.frac_positions @ integer_inverse(k_total).astype(float))
    return Crystal(crystal.species, new_frac, reduced_lattice), k_total


def is_niggli_reduced(lattice, eps: float | None = None) -> bool:
    """Check the main Niggli conditions (used as a test oracle)."""
    lattice = np.asarray(lattice, dtype=float)
    if eps is None:
        eps = EPS_SCALE * abs(np.linalg.det(lattice)) ** (1.0 / 3.0)
    a_vec, b_vec, c_vec = lattice
    big_a, big_b, big_c = (float(v @ v) for v in (a_vec, b_vec, c_vec))
    xi = 2.0 * float(b_vec @ c_vec)
    eta = 2.0 * float(a_vec @ c_vec)
    zeta = 2.0 * float(a_vec @ b_vec)
    if big_a > big_b + eps or big_b > big_c + eps:
        return False
    if abs(big_a - big_b) <= eps and abs(xi) > abs(eta) + eps:
        return False
    if abs(big_b - big_c) <= eps and abs(eta) > abs(zeta) + eps:
        return False
    signs = [_eps_sign(xi, eps), _eps_sign(eta, eps), _eps_sign(zeta, eps)]
    all_positive = all(s == 1 for s in signs)
    none_positive = all(s <= 0 for s in signs)
    if not (all_positive or none_positive):
        return False
    if abs(xi) > big_b + eps or abs(eta) > big_a + eps or abs(zeta) > big_a + eps:
        return False
    if xi + eta + zeta + big_a + big_b < -eps:
        return False
    return True


def _translation_maps(crystal: Crystal, shift, tol: float) -> bool:
    """Does shifting every atom by ``shift`` permute the structure (species kept)?"""
    shifted = wrap_frac(crystal.frac_positions + np.asarray(shift))
    delta = shifted[:, None, :] - crystal.frac_positions[None, :, :]
    delta -= np.round(delta)
    close = np.linalg.norm(delta, axis=2) <= tol
    close &= crystal.species[:, None] == crystal.species[None, :]
    return bool(np.all(close.sum(axis=1) == 1) and np.all(close.sum(axis=0) == 1))


def _row_echelon_basis(rows: np.ndarray) -> np.ndarray:
    """Integer row-echelon basis (3x3) of the lattice generated by ``rows``."""
    work = [row.astype(object) for row in rows]
    basis = []
    for col in range(3):
        while True:
            nonzero = [r for r in work if r[col] != 0]
            if not nonzero:
                raise InconsistentSupercell("translation set does not span the cell")
            pivot = min(nonzero, key=lambda r: abs(r[col]))
            remaining = []
            finished = True
            for r in work:
                if r is pivot:
                    continue
                if r[col] != 0:
                    r = r - (r[col] // pivot[col]) * pivot
                    finished = finished and r[col] == 0
                if any(v != 0 for v in r):
                    remaining.append(r)
            if finished:
                basis.append(pivot if pivot[col] > 0 else -pivot)
                work = remaining
                break
            work = remaining + [pivot]
    return np.array([[int(v) for v in row] for row in basis], dtype=np.int64)


def reduce_to_primitive(crystal: Crystal, tol: float = 1e-4) -> Crystal:
    """Collapse a supercell onto its primitive cell.

    Searches pure translations among difference vectors of the least frequent
    species; when any map the structure onto itself the cell is re-expressed in
    the finer translation lattice and coincident atoms are merged.  Idempotent:
    a primitive cell is returned unchanged.
    """
    if crystal.n == 1:
        return crystal
    zs, counts = np.unique(crystal.species, return_counts=True)
    rare_z = zs[counts == counts.min()].min()
    anchors = np.flatnonzero(crystal.species == rare_z)
    base = anchors[0]
    translations = []
    for other in anchors[1:]:
        t = wrap_frac(crystal.frac_positions[other] - crystal.frac_positions[base])
        if np.linalg.norm(min_image_delta(t, 0.0)) <= tol:
            continue
        if _translation_maps(crystal, t, tol):
            translations.append(t)
    if not translations:
        return crystal

    m = len(translations) + 1  # group order, identity included
    if crystal.n % m != 0:
        raise InconsistentSupercell(
            f"{len(translations)} pure translations found but {crystal.n} atoms are not divisible by {m}")
    scaled = np.rint(np.asarray(translations) * m)
    if np.max(np.abs(scaled / m - np.asarray(translations))) > 10 * tol:
        raise InconsistentSupercell("pure translations are not rational in the cell basis")

    rows = np.vstack([m * np.eye(3, dtype=np.int64), scaled.astype(np.int64)])
    basis = _row_echelon_basis(rows).astype(float) / m
    if not math.isclose(abs(np.linalg.det(basis)), 1.0 / m, rel_tol=1e-9):
        raise InconsistentSupercell("translation lattice volume does not match the group order")

    new_lattice = basis @ crystal.lattice
    new_frac = wrap_frac(crystal.frac_positions @ np.linalg.inv(basis))
    keep_idx: list[int] = []
    for i in range(crystal.n):
        duplicate = False
        for j in keep_idx:
            if np.linalg.norm(min_image_delta(new_frac[i], new_frac[j])) <= tol:
                if crystal.species[i] != crystal.species[j]:
                    raise InconsistentSupercell("different species merge onto one primitive site")
                duplicate = True
                break
        if not duplicate:
            keep_idx.append(i)
    if len(keep_idx) != crystal.n // m:
        raise InconsistentSupercell(
            f"expected {crystal.n // m} primitive atoms, found {len(keep_idx)}")
    return Crystal(crystal.species[keep_idx], new_frac[keep_idx], new_lattice)
