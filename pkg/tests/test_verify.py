import json

import numpy as np
import pytest

from mat2seq import (Crystal, canonicalize, decode, encode, match_structures,
                     transform, verify_uniqueness)
from mat2seq.verify import TRANSFORM_KINDS, make_corpus, random_unimodular


@pytest.fixture(scope="module")
def small_corpus():
    return make_corpus(12, seed=41)


class TestTransforms:
    def test_deterministic_in_seed(self, cscl):
        for kind in TRANSFORM_KINDS:
            a = transform(cscl, kind, seed=9)
            b = transform(cscl, kind, seed=9)
            assert np.allclose(a.lattice, b.lattice)
            assert np.allclose(a.frac_positions, b.frac_positions)

    def test_reexpress_preserves_volume(self, cscl):
        moved = transform(cscl, "reexpress_lattice", seed=5)
        assert moved.volume == pytest.approx(cscl.volume)

    def test_rotate_preserves_distances(self, nacl_primitive):
        moved = transform(nacl_primitive, "rotate", seed=3)

        def pair_distance(c):
            delta = (c.frac_positions[0] - c.frac_positions[1]) @ c.lattice
            return np.linalg.norm(delta)

        assert abs(pair_distance(moved) - pair_distance(nacl_primitive)) < 1e-9

    def test_unknown_kind_rejected(self, cscl):
        with pytest.raises(ValueError):
            transform(cscl, "mirror", seed=1)

    def test_random_unimodular_has_unit_det(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            k = random_unimodular(rng)
            assert round(np.linalg.det(k.astype(float))) == 1

    @pytest.mark.parametrize("kind", TRANSFORM_KINDS)
    def test_transforms_are_structure_preserving(self, kind, small_corpus):
        crystal = small_corpus[0]
        moved = transform(crystal, kind, seed=21)
        matched, rmse = match_structures(crystal, moved)
        assert matched
        assert rmse < 1e-6


class TestVerifyUniqueness:
    def test_identity_transforms_trivially_unique(self, small_corpus):
        report = verify_uniqueness(small_corpus[:4], 2, kinds=(), seed=1)
        assert report["rate"] == 1.0
        assert report["failures"] == []

    def test_full_transform_set(self, small_corpus):
        report = verify_uniqueness(small_corpus, 3, seed=2)
        assert report["rate"] == 1.0
        assert report["total"] == len(small_corpus) * 3

    def test_report_reproducible(self, small_corpus):
        a = verify_uniqueness(small_corpus[:5], 2, seed=33)
        b = verify_uniqueness(small_corpus[:5], 2, seed=33)
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_disabled_origin_selection_is_detected(self, small_corpus):
        report = verify_uniqueness(small_corpus, 2, seed=3,
                                   disable_origin_selection=True)
        assert report["rate"] < 1.0
        assert report["failures"]
        failure = report["failures"][0]
        assert set(failure) == {"id", "transform_chain", "first_diff_line"}

    def test_symmetric_repeated_species_structures(self, cscl, nacl_primitive,
                                                   inversion_pair):
        corpus = [cscl, nacl_primitive, inversion_pair]
        report = verify_uniqueness(corpus, 4, seed=4)
        assert report["rate"] == 1.0


class TestMatchStructures:
    def test_self_match_is_exact(self, cscl):
        matched, rmse = match_structures(cscl, cscl)
        assert matched and rmse == 0.0

    def test_roundtrip_within_quantization(self, small_corpus):
        crystal = small_corpus[1]
        rebuilt = decode(encode(canonicalize(crystal)))
        matched, rmse = match_structures(crystal, rebuilt)
        assert matched
        assert rmse <= 1e-3

    def test_different_materials_do_not_match(self, cscl, nacl_primitive):
        matched, rmse = match_structures(cscl, nacl_primitive)
        assert not matched
        assert rmse == float("inf")

    def test_supercell_matches_original(self, cscl):
        from conftest import replicate

        matched, rmse = match_structures(cscl, replicate(cscl, (2, 1, 1)))
        assert matched and rmse < 1e-9

    def test_species_permutation_does_not_match(self):
        a = Crystal([11, 17], [[0, 0, 0], [0.5, 0.5, 0.5]], np.eye(3) * 4.1)
        b = Crystal([11, 11], [[0, 0, 0], [0.5, 0.5, 0.5]], np.eye(3) * 4.1)
        matched, _ = match_structures(a, b)
        assert not matched
