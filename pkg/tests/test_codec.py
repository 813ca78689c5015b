import json
import re

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mat2seq import (CanonicalCell, IrreducibleAtom, LatticeParameters, SymmetryOperation,
                     bin_property, canonicalize, decode, detokenize, encode, quantize,
                     tokenize, vocabulary)
from mat2seq.codec import PropertyBin
from mat2seq.errors import (MultiplicityMismatch, NegativeValue, ParseError, SpeciesClash,
                            UnknownToken, UnsupportedElement, ValueOutOfRange)


def identity_cell(z=6, label="P1", extra_atoms=()):
    atoms = (IrreducibleAtom(z, [0, 0, 0], 1),) + tuple(extra_atoms)
    return CanonicalCell(
        params=LatticeParameters(4.0, 5.0, 6.0, 90.0, 90.0, 90.0),
        atoms=atoms,
        operations=(SymmetryOperation(np.eye(3, dtype=int), np.zeros(3)),),
        formula="C",
        space_group_label=label,
    )


class TestQuantize:
    @pytest.mark.parametrize("value, text", [
        (1 / 3, "0.3333"),
        (90, "90.0000"),
        (2 / 3, "0.6667"),
        (0.00005, "0.0001"),
        (123.45678, "123.4568"),
    ])
    def test_rendering(self, value, text):
        assert quantize(value) == text

    def test_fractional_unit_wrap(self):
        assert quantize(0.99996, wrap_unit=True) == "0.0000"
        assert quantize(0.99996) == "1.0000"

    @given(st.floats(min_value=0, max_value=300, allow_nan=False))
    def test_format_and_error_bound(self, x):
        text = quantize(x)
        assert re.fullmatch(r"\d+\.\d{4}", text)
        assert abs(float(text) - x) <= 5e-5 + 1e-12


class TestBinProperty:
    @pytest.mark.parametrize("value, width, expected", [
        (0.7, 0.5, 1),
        (0.0, 0.5, 0),
        (3.7, 0.5, 7),
        (0.49999, 0.5, 0),
        (0.5, 0.5, 1),
    ])
    def test_half_open_intervals(self, value, width, expected):
        assert bin_property(value, width) == expected

    def test_negative_rejected(self):
        with pytest.raises(NegativeValue):
            bin_property(-0.1, 0.5)

    def test_property_bin_invariant(self):
        PropertyBin(0.7, 0.5, 1)
        with pytest.raises(ValueError):
            PropertyBin(0.7, 0.5, 2)


class TestVocabulary:
    def test_bijective(self):
        vocab = vocabulary()
        assert len({vocab.id_for(t) for t in vocab.tokens}) == len(vocab)
        for token in ("Cl", "lattice_parameters", "unknown_prop", "300", ".", "\n",
                      "<pad>", "P-1", "G48", "prop", "operations", " "):
            assert vocab.token_for(vocab.id_for(token)) == token

    def test_element_coverage(self):
        vocab = vocabulary()
        ids = {vocab.id_for(str(k)) for k in range(301)}
        assert len(ids) == 301
        assert "Fm" not in vocab.as_dict()
        assert len([t for t in vocab.tokens if t in {"H", "He", "Pu", "Bi", "U"}]) == 5

    def test_as_dict_json_exportable(self):
        dumped = json.dumps(vocabulary().as_dict())
        assert json.loads(dumped)["formula"] == vocabulary().id_for("formula")


class TestTokenize:
    def test_real_values_are_character_streams(self, cscl):
        seq = encode(canonicalize(cscl))
        vocab = vocabulary()
        strings = [vocab.token_for(t) for t in seq.tokens]
        # the coordinate 0.5000 appears as single characters
        joined = "|".join(strings)
        assert "0|.|5|0|0|0" in joined

    def test_keywords_are_single_tokens(self, cscl):
        seq = encode(canonicalize(cscl))
        vocab = vocabulary()
        assert vocab.id_for("lattice_parameters") in seq.tokens
        assert vocab.id_for("space_group_symbol") in seq.tokens

    def test_roundtrip_on_encoder_output(self, cscl, nacl_primitive, triclinic_two_species):
        for crystal in (cscl, nacl_primitive, triclinic_two_species):
            text = encode(canonicalize(crystal)).text
            assert detokenize(tokenize(text)) == text

    def test_unknown_fragment_rejected(self, cscl):
        text = encode(canonicalize(cscl)).text
        with pytest.raises(UnknownToken):
            tokenize(text.replace("space_group_symbol", "space_group"))
        with pytest.raises(UnknownToken):
            tokenize(text[:-20])

    def test_integer_fields_are_single_tokens(self):
        cell = identity_cell()
        seq = encode(cell, property_bins=[("band_gap", 42)])
        strings = [vocabulary().token_for(t) for t in seq.tokens]
        assert "42" in strings


class TestEncode:
    def test_layout_starts_with_property_slots(self, cscl):
        text = encode(canonicalize(cscl)).text
        lines = text.split("\n")
        assert all(line == "prop: unknown_prop" for line in lines[:10])
        assert lines[10] == "formula: ClCs"
        assert lines[11].startswith("space_group_symbol: ")
        assert lines[12] == "operations: 48"

    def test_deterministic(self, nacl_primitive):
        cell = canonicalize(nacl_primitive)
        assert encode(cell).text == encode(cell).text

    def test_unsupported_element(self):
        with pytest.raises(UnsupportedElement):
            encode(identity_cell(z=100))  # Fm is outside the 89-symbol vocabulary

    def test_property_bins_fill_in_order(self):
        seq = encode(identity_cell(), property_bins=[("band_gap", 1), ("e_hull", 0)])
        lines = seq.text.split("\n")
        assert lines[0] == "prop: 1"
        assert lines[1] == "prop: 0"
        assert all(line == "prop: unknown_prop" for line in lines[2:10])

    def test_too_many_property_bins(self):
        with pytest.raises(ValueOutOfRange):
            encode(identity_cell(), property_bins=[("p", 0)] * 11)

    def test_out_of_range_bin(self):
        with pytest.raises(ValueOutOfRange):
            encode(identity_cell(), property_bins=[("band_gap", 301)])

    def test_out_of_range_multiplicity(self):
        cell = identity_cell(extra_atoms=(IrreducibleAtom(6, [0.5, 0.5, 0.5], 301),))
        with pytest.raises(ValueOutOfRange):
            encode(cell)


class TestDecode:
    def test_identity_ops_keep_atom_count(self):
        cell = identity_cell(extra_atoms=(IrreducibleAtom(8, [0.5, 0.5, 0.5], 1),))
        crystal = decode(encode(cell))
        assert crystal.n == 2

    def test_roundtrip_positions_within_quantization(self, nacl_primitive):
        cell = canonicalize(nacl_primitive)
        crystal = decode(encode(cell))
        assert crystal.n == nacl_primitive.n
        assert sorted(crystal.species.tolist()) == sorted(nacl_primitive.species.tolist())

    def test_truncated_text_reports_position(self, cscl):
        text = encode(canonicalize(cscl)).text
        truncated = "\n".join(text.split("\n")[:12]) + "\n"
        with pytest.raises(ParseError) as err:
            decode(truncated)
        assert err.value.line == 13

    def test_empty_text_fails_at_line_one(self):
        with pytest.raises(ParseError) as err:
            decode("")
        assert err.value.line == 1

    def test_trailing_garbage_rejected(self, cscl):
        text = encode(canonicalize(cscl)).text
        with pytest.raises(ParseError):
            decode(text + "extra\n")

    def test_multiplicity_mismatch(self):
        text = encode(identity_cell()).text
        bad = text.replace("C 1 0.0000 0.0000 0.0000", "C 2 0.0000 0.0000 0.0000")
        with pytest.raises(MultiplicityMismatch):
            decode(bad)

    def test_species_clash(self):
        cell = identity_cell(extra_atoms=(IrreducibleAtom(8, [0.5, 0.5, 0.5], 1),))
        text = encode(cell).text
        bad = text.replace("atoms: 2", "atoms: 2").replace(
            "O 1 0.5000 0.5000 0.5000", "O 1 0.0000 0.0000 0.0000")
        with pytest.raises((SpeciesClash, MultiplicityMismatch)):
            decode(bad)

    def test_malformed_coordinate_rejected(self):
        text = encode(identity_cell()).text
        with pytest.raises(ParseError):
            decode(text.replace("0.0000 0.0000 0.0000", "0.000 0.0000 0.0000"))

    def test_unknown_label_rejected(self):
        text = encode(identity_cell()).text
        with pytest.raises(ParseError):
            decode(text.replace("space_group_symbol: P1", "space_group_symbol: Q9"))


class TestRoundTripProperties:
    def test_encode_of_decode_is_fixed_point(self, cscl, nacl_primitive,
                                             triclinic_two_species, inversion_pair):
        for crystal in (cscl, nacl_primitive, triclinic_two_species, inversion_pair):
            seq = encode(canonicalize(crystal))
            again = encode(canonicalize(decode(seq)))
            assert again.text == seq.text

    def test_property_slots_survive_reencoding(self, cscl):
        cell = canonicalize(cscl)
        seq = encode(cell, property_bins=[("band_gap", 3)])
        reparsed = decode(seq)
        # structure identical regardless of the property prefix
        assert encode(canonicalize(reparsed)).text == encode(cell).text
