import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mat2seq import Crystal, LatticeParameters, frac_to_cart, lattice_from_params, params_from_lattice
from mat2seq.core import quantize_ticks, wrap_frac
from mat2seq.errors import DegenerateLattice


class TestCrystal:
    def test_wraps_fractional_components(self):
        c = Crystal([6], [[1.25, -0.25, 2.0]], np.eye(3) * 3)
        assert np.allclose(c.frac_positions[0], [0.25, 0.75, 0.0])

    def test_snaps_near_unit_components_to_zero(self):
        c = Crystal([6], [[1.0 - 1e-10, -1e-10, 0.999999999]], np.eye(3) * 3)
        assert np.all(c.frac_positions[0] == 0.0)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            Crystal([6, 7], [[0, 0, 0]], np.eye(3))

    def test_rejects_bad_atomic_numbers(self):
        with pytest.raises(ValueError):
            Crystal([0], [[0, 0, 0]], np.eye(3))
        with pytest.raises(ValueError):
            Crystal([104], [[0, 0, 0]], np.eye(3))

    def test_rejects_degenerate_lattice(self):
        lattice = [[1, 0, 0], [0, 1, 0], [1, 1, 0]]  # l3 = l1 + l2
        with pytest.raises(DegenerateLattice):
            Crystal([6], [[0, 0, 0]], lattice)

    def test_arrays_are_immutable(self):
        c = Crystal([6], [[0.5, 0.5, 0.5]], np.eye(3))
        with pytest.raises(ValueError):
            c.frac_positions[0, 0] = 0.1


class TestFracToCart:
    def test_cubic_scaling(self):
        c = Crystal([6], [[0.5, 0.5, 0.5]], np.eye(3) * 4.0)
        assert np.allclose(frac_to_cart(c, 0), [2.0, 2.0, 2.0])

    def test_origin_fixed_point(self):
        c = Crystal([6], [[0, 0, 0]], np.array([[4.0, 1.0, 0.3], [0.2, 5.0, 0.1], [0.4, 0.2, 6.0]]))
        assert np.allclose(frac_to_cart(c, 0), [0, 0, 0])

    def test_oblique_lattice_by_hand(self):
        # 0.5*(1,0,0) + 0.5*(0.5,0.8660,0) = (0.75, 0.4330, 0)
        lattice = [[1, 0, 0], [0.5, 0.8660, 0], [0, 0, 2]]
        c = Crystal([6, 6], [[0.5, 0.5, 0.0], [0.1, 0.1, 0.1]], lattice)
        assert np.allclose(frac_to_cart(c, 0), [0.75, 0.4330, 0.0], atol=1e-12)

    def test_index_out_of_range(self):
        c = Crystal([6], [[0, 0, 0]], np.eye(3))
        with pytest.raises(IndexError):
            frac_to_cart(c, 1)

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(4)
        lattice = np.array([[4.1, 0.2, 0.0], [1.1, 3.8, 0.4], [0.7, 1.3, 5.2]])
        c = Crystal([6], [[0.3, 0.6, 0.9]], lattice)
        theta = 0.7
        rot = np.array([[math.cos(theta), -math.sin(theta), 0],
                        [math.sin(theta), math.cos(theta), 0],
                        [0, 0, 1]])
        rotated = Crystal([6], [[0.3, 0.6, 0.9]], lattice @ rot.T)
        assert np.allclose(frac_to_cart(rotated, 0), rot @ frac_to_cart(c, 0))


class TestLatticeParams:
    def test_orthogonal_cell(self):
        p = params_from_lattice(np.diag([3.0, 4.0, 5.0]))
        assert p.as_tuple() == pytest.approx((3, 4, 5, 90, 90, 90))

    def test_hexagonal_cell(self):
        lattice = [[1, 0, 0], [0.5, math.sqrt(3) / 2, 0], [0, 0, 2]]
        p = params_from_lattice(lattice)
        assert p.as_tuple() == pytest.approx((1, 1, 2, 90, 90, 60))

    def test_unrealizable_angles_rejected(self):
        with pytest.raises(DegenerateLattice):
            LatticeParameters(1, 1, 1, 120, 120, 120)

    def test_roundtrip(self):
        p = LatticeParameters(3.2, 4.7, 5.9, 77.3, 101.8, 64.2)
        back = params_from_lattice(lattice_from_params(p))
        assert np.allclose(back.as_tuple(), p.as_tuple(), atol=1e-8)

    def test_fixed_orientation_convention(self):
        lattice = lattice_from_params(LatticeParameters(3.2, 4.7, 5.9, 77.3, 101.8, 64.2))
        assert lattice[0, 1] == 0 and lattice[0, 2] == 0 and lattice[0, 0] > 0
        assert lattice[1, 2] == 0 and lattice[1, 1] > 0
        assert lattice[2, 2] > 0
        assert np.linalg.det(lattice) > 0

    @pytest.mark.parametrize("seed", range(5))
    def test_params_rotation_invariant(self, seed):
        from mat2seq.verify import random_rotation

        rng = np.random.default_rng(seed)
        lattice = np.array([[4.1, 0.2, 0.0], [1.1, 3.8, 0.4], [0.7, 1.3, 5.2]])
        rot = random_rotation(rng)
        a = params_from_lattice(lattice)
        b = params_from_lattice(lattice @ rot.T)
        assert np.allclose(a.as_tuple(), b.as_tuple(), atol=1e-8)


class TestHelpers:
    @given(st.floats(min_value=-5, max_value=5, allow_nan=False, allow_infinity=False))
    def test_wrap_frac_range(self, x):
        wrapped = wrap_frac(np.array([x]))[0]
        assert 0.0 <= wrapped < 1.0
        # wrapping never moves a value by a non-integer amount
        assert abs((x - wrapped) - round(x - wrapped)) < 1e-9

    @pytest.mark.parametrize("value, ticks", [
        (1 / 3, 3333),
        (90.0, 900000),
        (0.99996, 10000),
        (0.36825, 3683),   # half-up on the printed decimal value
        (0.0, 0),
        (0.00005, 1),
    ])
    def test_quantize_ticks_half_up(self, value, ticks):
        assert quantize_ticks(value) == ticks
