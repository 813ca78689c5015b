"""mat2seq: unique, rotation- and cell-choice-invariant sequences for crystals.

The package turns any unit-cell description of a periodic structure into one
canonical token sequence (and back): supercells are reduced to primitive
cells, the lattice basis is Niggli-reduced, a unique origin atom is selected
by local-density rules, and the irreducible atoms plus their symmetry
operations are serialized under a fixed grammar.
"""

from .canonicalize import (RADIUS_LADDER, canonicalize, directional_densities,
                           local_density, order_atoms, origin_candidates,
                           select_origin, shift_origin)
from .cif_io import CifDocument, parse_cif, parse_cif_document, write_cif
from .codec import (PropertyBin, TokenVocabulary, bin_property, cell_to_crystal,
                    decode, detokenize, encode, quantize, tokenize, vocabulary)
from .core import (CanonicalCell, Crystal, CrystalSequence, IrreducibleAtom,
                   LatticeParameters, SymmetryOperation, frac_to_cart,
                   lattice_from_params, params_from_lattice)
from .errors import Mat2SeqError
from .lattice_reduce import niggli_reduce, reduce_to_primitive
from .symmetry import (classify_space_group, detect_operations, extract_irreducible,
                       operation_to_triplet, reconstruct_full_cell, triplet_to_operation)
from .verify import (TRANSFORM_KINDS, make_corpus, match_structures, random_crystal,
                     transform, verify_uniqueness)

__version__ = "0.1.0"


def structure_to_sequence(crystal: Crystal, symprec: float = 0.01,
                          property_bins=None) -> CrystalSequence:
    """Canonicalize and encode in one step."""
    return encode(canonicalize(crystal, symprec), property_bins)


def sequence_to_structure(text) -> Crystal:
    """Decode sequence text back into a full unit cell."""
    return decode(text)


__all__ = [
    "CanonicalCell", "CifDocument", "Crystal", "CrystalSequence", "IrreducibleAtom",
    "LatticeParameters", "Mat2SeqError", "PropertyBin", "RADIUS_LADDER",
    "SymmetryOperation", "TokenVocabulary", "TRANSFORM_KINDS", "bin_property",
    "canonicalize", "cell_to_crystal", "classify_space_group", "decode",
    "detect_operations", "detokenize", "directional_densities", "encode",
    "extract_irreducible", "frac_to_cart", "lattice_from_params", "local_density",
    "make_corpus", "match_structures", "niggli_reduce", "operation_to_triplet",
    "order_atoms", "origin_candidates", "params_from_lattice", "parse_cif",
    "parse_cif_document", "quantize", "random_crystal", "reconstruct_full_cell",
    "reduce_to_primitive", "select_origin", "sequence_to_structure", "shift_origin",
    "structure_to_sequence", "tokenize", "transform", "triplet_to_operation",
    "verify_uniqueness", "vocabulary", "write_cif",
]
