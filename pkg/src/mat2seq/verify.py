"""Structure-preserving transforms, the uniqueness harness, and a matcher.

``verify_uniqueness`` is the empirical proof machinery: it re-describes every
corpus structure through random rotations, translations, boundary shifts,
basis re-expressions and atom permutations, and demands byte-identical
sequence text for every description.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .canonicalize import canonicalize
from .codec import cell_to_crystal, encode
from .core import Crystal, wrap_frac
from .elements import ENCODABLE_Z
from .errors import Mat2SeqError

TRANSFORM_KINDS = ("rotate", "translate", "shift_boundary", "reexpress_lattice",
                   "permute_atoms")

# Matcher tolerances: documented defaults of the usual structure matcher.
LENGTH_TOL = 0.2      # relative
ANGLE_TOL = 5.0       # degrees
SITE_TOL = 0.3        # times (V/n)**(1/3)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random proper rotation (Shoemake quaternion sampling)."""
    u1, u2, u3 = rng.random(3)
    q = np.array([
        np.sqrt(1 - u1) * np.sin(2 * np.pi * u2),
        np.sqrt(1 - u1) * np.cos(2 * np.pi * u2),
        np.sqrt(u1) * np.sin(2 * np.pi * u3),
        np.sqrt(u1) * np.cos(2 * np.pi * u3),
    ])
    x, y, z, w = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_unimodular(rng: np.random.Generator, bound: int = 2) -> np.ndarray:
    """Random integer matrix with entries in [-bound, bound] and det exactly 1."""
    while True:
        k = rng.integers(-bound, bound + 1, size=(3, 3))
        if round(np.linalg.det(k.astype(float))) == 1:
            return k.astype(np.int64)


def transform(crystal: Crystal, kind: str, seed: int) -> Crystal:
    """Apply one structure-preserving re-description; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    if kind == "rotate":
        rot = random_rotation(rng)
        return Crystal(crystal.species, crystal.frac_positions, crystal.lattice @ rot.T)
    if kind == "translate":
        shift = rng.random(3)
        return crystal.with_positions(wrap_frac(crystal.frac_positions + shift))
    if kind == "shift_boundary":
        # Land a random atom just around the origin so its images straddle the cell edge.
        atom = int(rng.integers(crystal.n))
        jiggle = rng.uniform(-0.05, 0.05, size=3)
        shift = jiggle - crystal.frac_positions[atom]
        return crystal.with_positions(wrap_frac(crystal.frac_positions + shift))
    if kind == "reexpress_lattice":
        k = random_unimodular(rng)
        new_lattice = k.astype(float) @ crystal.lattice
        new_frac = wrap_frac(crystal.frac_positions @ np.linalg.inv(k.astype(float)))
        return Crystal(crystal.species, new_frac, new_lattice)
    if kind == "permute_atoms":
        order = rng.permutation(crystal.n)
        return Crystal(crystal.species[order], crystal.frac_positions[order], crystal.lattice)
    raise ValueError(f"unknown transform kind {kind!r}; choose from {TRANSFORM_KINDS}")


def random_crystal(rng: np.random.Generator, max_atoms: int = 20) -> Crystal:
    """One random valid crystal for harness corpora.

    Species are drawn without replacement, lattice parameters keep a safety
    margin from reduction decision boundaries, and atoms keep a minimum
    separation, so corpus structures sit away from tie-breaking knife edges.
    """
    n = int(rng.integers(1, max_atoms + 1))
    species = rng.choice(sorted(ENCODABLE_Z), size=n, replace=False)
    while True:
        lengths = rng.uniform(2.5, 10.0, size=3)
        angles = rng.uniform(60.0, 120.0, size=3)
        if any(abs(angles[i] - 90.0) < 0.1 for i in range(3)):
            continue
        if any(abs(lengths[i] - lengths[j]) < 1e-3 for i in range(3) for j in range(i)):
            continue
        ca, cb, cg = np.cos(np.radians(angles))
        gram_det = 1 + 2 * ca * cb * cg - ca * ca - cb * cb - cg * cg
        if gram_det <= 0.1:
            continue
        break
    from .core import LatticeParameters, lattice_from_params

    lattice = lattice_from_params(LatticeParameters(*lengths, *angles))
    positions: list[np.ndarray] = []
    while len(positions) < n:
        cand = rng.random(3)
        ok = True
        for other in positions:
            delta = cand - other
            delta -= np.round(delta)
            if np.max(np.abs(delta)) < 0.02 or np.linalg.norm(delta @ lattice) < 0.6:
                ok = False
                break
        if ok:
            positions.append(cand)
    return Crystal(species, np.array(positions), lattice)


def make_corpus(size: int, seed: int, max_atoms: int = 20) -> list[Crystal]:
    """Deterministic corpus of random valid crystals."""
    streams = np.random.SeedSequence(seed).spawn(size)
    return [random_crystal(np.random.default_rng(s), max_atoms) for s in streams]


def _first_diff_line(a: str, b: str) -> str:
    for la, lb in zip(a.split("\n"), b.split("\n")):
        if la != lb:
            return f"{la!r} != {lb!r}"
    return "texts differ in length"


def verify_uniqueness(corpus, trials_per_structure: int, kinds=TRANSFORM_KINDS,
                      seed: int = 0, symprec: float = 0.01,
                      disable_origin_selection: bool = False, ids=None) -> dict:
    """Byte-level uniqueness check across random re-descriptions.

    For every structure and trial the selected transforms are applied in a
    random order and the transformed structure is re-encoded; any deviation
    from the reference text counts as a failure.  The report is reproducible:
    the same seed always yields the same bytes.

    Returns ``{"total", "successes", "rate", "failures": [...]}``, each failure
    carrying the structure id, the transform chain, and the first line that
    differs (or the error that interrupted encoding).
    """
    corpus = list(corpus)
    kinds = tuple(k for k in (kinds or ()) if k != "none")
    for kind in kinds:
        if kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform kind {kind!r}")
    ids = list(ids) if ids is not None else list(range(len(corpus)))
    streams = np.random.SeedSequence(seed).spawn(max(len(corpus), 1))
    total = 0
    successes = 0
    failures = []
    for structure_id, crystal, stream in zip(ids, corpus, streams):
        rng = np.random.default_rng(stream)
        try:
            reference = encode(canonicalize(
                crystal, symprec, disable_origin_selection=disable_origin_selection)).text
        except Mat2SeqError as exc:
            total += trials_per_structure
            failures.append({"id": structure_id, "transform_chain": [],
                             "first_diff_line": f"error: {type(exc).__name__}: {exc}"})
            continue
        for _ in range(trials_per_structure):
            total += 1
            chain = [kinds[i] for i in rng.permutation(len(kinds))]
            candidate = crystal
            for kind in chain:
                candidate = transform(candidate, kind, int(rng.integers(2 ** 63)))
            try:
                text = encode(canonicalize(
                    candidate, symprec,
                    disable_origin_selection=disable_origin_selection)).text
            except Mat2SeqError as exc:
                failures.append({"id": structure_id, "transform_chain": chain,
                                 "first_diff_line": f"error: {type(exc).__name__}: {exc}"})
                continue
            if text == reference:
                successes += 1
            else:
                failures.append({"id": structure_id, "transform_chain": chain,
                                 "first_diff_line": _first_diff_line(reference, text)})
    rate = successes / total if total else 1.0
    return {"total": total, "successes": successes, "rate": rate, "failures": failures}


def match_structures(a: Crystal, b: Crystal, symprec: float = 0.01) -> tuple[bool, float]:
    """Do two cells describe the same material, and how far apart are they?

    Both inputs are canonicalized first.  A match requires identical species
    multisets, lattice parameters within (20% lengths, 5 deg angles), and a
    species-preserving assignment with every minimum-image displacement below
    0.3*(V/n)**(1/3).  The second value is the RMS Cartesian displacement under
    the optimal per-species assignment, normalized by (V/n)**(1/3) of the first
    structure (inf when unmatched).
    """
    ca = cell_to_crystal(canonicalize(a, symprec))
    cb = cell_to_crystal(canonicalize(b, symprec))
    if sorted(ca.species.tolist()) != sorted(cb.species.tolist()):
        return False, float("inf")
    from .core import params_from_lattice

    pa = params_from_lattice(ca.lattice).as_tuple()
    pb = params_from_lattice(cb.lattice).as_tuple()
    for la, lb in zip(pa[:3], pb[:3]):
        if abs(la - lb) > LENGTH_TOL * max(la, lb):
            return False, float("inf")
    for aa, ab in zip(pa[3:], pb[3:]):
        if abs(aa - ab) > ANGLE_TOL:
            return False, float("inf")
    scale = (ca.volume / ca.n) ** (1.0 / 3.0)
    offsets = np.array(np.meshgrid(*([(-1, 0, 1)] * 3), indexing="ij")).reshape(3, -1).T
    displacements = []
    for z in np.unique(ca.species):
        fa = ca.frac_positions[ca.species == z]
        fb = cb.frac_positions[cb.species == z]
        delta = fa[:, None, None, :] - fb[None, :, None, :] + offsets[None, None, :, :]
        dist = np.linalg.norm(delta @ ca.lattice, axis=3).min(axis=2)
        rows, cols = linear_sum_assignment(dist)
        displacements.extend(dist[rows, cols])
    displacements = np.array(displacements)
    if np.any(displacements > SITE_TOL * scale):
        return False, float("inf")
    rmse = float(np.sqrt(np.mean(displacements ** 2)) / scale)
    return True, rmse
