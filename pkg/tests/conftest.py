import itertools

import numpy as np
import pytest

from mat2seq import Crystal


@pytest.fixture
def simple_cubic():
    """One carbon atom in a 4 A cube."""
    return Crystal([6], [[0.0, 0.0, 0.0]], np.eye(3) * 4.0)


@pytest.fixture
def cscl():
    """CsCl structure: Cs at the corner, Cl at the body center, a = 4.11 A."""
    return Crystal([55, 17], [[0, 0, 0], [0.5, 0.5, 0.5]], np.eye(3) * 4.11)


@pytest.fixture
def nacl_primitive():
    """Rocksalt primitive cell: fcc basis vectors, Na at origin, Cl at (1/2,1/2,1/2).

    The nearest Na-Cl image distance is a/2 = 2.82 A with 6 such neighbors.
    """
    half = 5.64 / 2.0
    lattice = half * np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    return Crystal([11, 17], [[0, 0, 0], [0.5, 0.5, 0.5]], lattice)


@pytest.fixture
def triclinic_two_species():
    """Two different species at generic positions; only the identity survives."""
    lattice = np.array([[4.1, 0.0, 0.0], [1.1, 3.8, 0.0], [0.7, 1.3, 5.2]])
    return Crystal([14, 8], [[0.11, 0.23, 0.31], [0.57, 0.79, 0.13]], lattice)


@pytest.fixture
def inversion_pair():
    """Two same-species atoms related by inversion through the origin."""
    lattice = np.array([[4.3, 0.0, 0.0], [0.9, 3.9, 0.0], [0.4, 1.2, 5.1]])
    return Crystal([16, 16], [[0.2, 0.3, 0.4], [0.8, 0.7, 0.6]], lattice)


def replicate(crystal: Crystal, factors) -> Crystal:
    """Supercell with the given (p, q, r) replication factors."""
    factors = np.asarray(factors, dtype=int)
    lattice = crystal.lattice * factors[:, None]
    species = []
    positions = []
    for offset in itertools.product(*(range(f) for f in factors)):
        for z, frac in zip(crystal.species, crystal.frac_positions):
            species.append(int(z))
            positions.append((frac + np.asarray(offset)) / factors)
    return Crystal(species, np.array(positions), lattice)


def brute_force_density(crystal: Crystal, index: int, radius: float, span: int = 3) -> int:
    """Independent oracle: enumerate image offsets and sum neighbor Z."""
    total = 0
    for offset in itertools.product(range(-span, span + 1), repeat=3):
        for j in range(crystal.n):
            delta = crystal.frac_positions[j] + np.asarray(offset) - crystal.frac_positions[index]
            dist = np.linalg.norm(delta @ crystal.lattice)
            if 1e-8 < dist < radius:
                total += int(crystal.species[j])
    return total


def brute_force_directional(crystal: Crystal, index: int, radius: float, span: int = 3):
    """Independent oracle for the per-axis directional densities."""
    sums = [0, 0, 0]
    for offset in itertools.product(range(-span, span + 1), repeat=3):
        for j in range(crystal.n):
            delta = crystal.frac_positions[j] + np.asarray(offset) - crystal.frac_positions[index]
            dist = np.linalg.norm(delta @ crystal.lattice)
            if not 1e-8 < dist < radius:
                continue
            for axis in range(3):
                if delta[axis] > 1e-8:
                    sums[axis] += int(crystal.species[j])
    return tuple(sums)
