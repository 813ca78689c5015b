"""Sequence text format, token vocabulary, and the encode/decode pair.

Sequence grammar, newline-terminated lines in this exact order::

    prop: <int|unknown_prop>          x 10
    formula: <reduced formula>
    space_group_symbol: <label>
    operations: <s>
    <xyz-triplet>                     x s
    lattice_parameters: a: <q>, b: <q>, c: <q>, alpha: <q>, beta: <q>, gamma: <q>
    atoms: <count>
    <El> <mult> <qx> <qy> <qz>        x count

``<q>`` is a fixed-point real with exactly four decimals (half-up rounding);
fractional values wrap ``1.0000`` to ``0.0000``.  Keywords, element symbols,
integers 0..300 and space-group labels are single tokens; reals are character
streams of digits and ``.``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (CanonicalCell, Crystal, CrystalSequence, IrreducibleAtom,
                   LatticeParameters, QUANT_TICKS, SymmetryOperation,
                   lattice_from_params, quantize_ticks)
from .elements import ENCODABLE_SYMBOLS, ENCODABLE_Z, symbol_for, z_for
from .errors import (DegenerateLattice, MultiplicityMismatch, NegativeValue,
                     ParseError, UnknownElement, UnknownToken, UnsupportedElement,
                     ValueOutOfRange)
from .symmetry import (expand_orbit, operation_to_triplet, reconstruct_full_cell,
                       triplet_to_operation)

MAX_INTEGER_TOKEN = 300
PROPERTY_SLOTS = 10
UNKNOWN_PROP = "unknown_prop"

_KEYWORD_TOKENS = ("space_group_symbol", "formula", "atoms", "lattice_parameters",
                   "a", "b", "c", "alpha", "beta", "gamma", UNKNOWN_PROP,
                   ",", " ", ":", "\n", "<pad>")
_TRIPLET_CHARS = ("x", "y", "z", "-", "+", "/", "(", ")")
_GRAMMAR_KEYWORDS = ("prop", "operations")
_LABEL_TOKENS = ("P1", "P-1") + tuple(f"G{k}" for k in range(1, MAX_INTEGER_TOKEN + 1))
_PARAM_FIELDS = ("a", "b", "c", "alpha", "beta", "gamma")


class TokenVocabulary:
    """Bijective token <-> id mapping covering every grammar-conformant text."""

    def __init__(self):
        ordered: list[str] = []
        seen: set[str] = set()
        sections = (
            ENCODABLE_SYMBOLS,
            tuple(str(k) for k in range(MAX_INTEGER_TOKEN + 1)),
            (".",),
            _KEYWORD_TOKENS,
            _TRIPLET_CHARS,
            _GRAMMAR_KEYWORDS,
            _LABEL_TOKENS,
        )
        for section in sections:
            for token in section:
                if token not in seen:
                    seen.add(token)
                    ordered.append(token)
        self._tokens = tuple(ordered)
        self._ids = {token: i for i, token in enumerate(self._tokens)}

    def __len__(self) -> int:
        return len(self._tokens)

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def id_for(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise UnknownToken(f"no vocabulary entry for {token!r}") from None

    def token_for(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._tokens):
            raise UnknownToken(f"token id {token_id} out of range")
        return self._tokens[token_id]

    def as_dict(self) -> dict[str, int]:
        """JSON-exportable token -> id mapping."""
        return dict(self._ids)


@lru_cache(maxsize=1)
def vocabulary() -> TokenVocabulary:
    return TokenVocabulary()


@dataclass(frozen=True)
class PropertyBin:
    """A property value discretized onto half-open intervals of ``width``."""

    value: float
    width: float
    bin: int

    def __post_init__(self):
        if self.bin != bin_property(self.value, self.width):
            raise ValueError("bin does not equal floor(value / width)")


def bin_property(value: float, width: float) -> int:
    """floor(value / width); intervals [k*width, (k+1)*width) map to k."""
    if width <= 0:
        raise ValueError("bin width must be positive")
    if value < 0:
        raise NegativeValue(f"property value {value} is negative")
    return int(math.floor(value / width))


def quantize(x: float, wrap_unit: bool = False) -> str:
    """Half-up 4-decimal fixed-point rendering; fractional 1.0000 wraps to 0.0000."""
    ticks = quantize_ticks(x)
    if wrap_unit:
        ticks %= QUANT_TICKS
    sign = "-" if ticks < 0 else ""
    whole, part = divmod(abs(ticks), QUANT_TICKS)
    return f"{sign}{whole}.{part:04d}"


# -- tokenizer -----------------------------------------------------------------

_ELEMENT_SET = frozenset(ENCODABLE_SYMBOLS)
_LABEL_SET = frozenset(_LABEL_TOKENS)
_REAL_CHARS = frozenset("0123456789.")
_TRIPLET_SET = frozenset(_TRIPLET_CHARS) | frozenset("0123456789.,")


class _TokenStream:
    def __init__(self):
        self.vocab = vocabulary()
        self.ids: list[int] = []

    def emit(self, token: str):
        self.ids.append(self.vocab.id_for(token))

    def emit_chars(self, text: str):
        for ch in text:
            self.emit(ch)

    def newline(self):
        self.emit("\n")


def _strip_keyword(line: str, keyword: str, line_no: int, stream: _TokenStream) -> str:
    prefix = keyword + ": "
    if not line.startswith(prefix):
        raise UnknownToken(f"line {line_no}: expected a {keyword!r} line, got {line!r}")
    stream.emit(keyword)
    stream.emit(":")
    stream.emit(" ")
    return line[len(prefix):]


def _emit_integer(value: str, line_no: int, stream: _TokenStream):
    if not value.isdigit() or str(int(value)) != value or int(value) > MAX_INTEGER_TOKEN:
        raise UnknownToken(f"line {line_no}: {value!r} is not an integer token")
    stream.emit(value)


def _emit_formula(body: str, line_no: int, stream: _TokenStream):
    pos = 0
    while pos < len(body):
        if body[pos].isdigit():
            end = pos
            while end < len(body) and body[end].isdigit():
                end += 1
            _emit_integer(body[pos:end], line_no, stream)
            pos = end
            continue
        for size in (2, 1):
            candidate = body[pos:pos + size]
            if candidate in _ELEMENT_SET:
                stream.emit(candidate)
                pos += size
                break
        else:
            raise UnknownToken(f"line {line_no}: no element token at {body[pos:]!r}")


def _emit_real(body: str, line_no: int, stream: _TokenStream) -> None:
    if not body or any(ch not in _REAL_CHARS for ch in body):
        raise UnknownToken(f"line {line_no}: {body!r} is not a real number")
    stream.emit_chars(body)


def tokenize(text: str) -> list[int]:
    """Token ids for grammar-conformant sequence text.

    The walk is grammar-aware: integers in discrete fields are single tokens
    while reals emit one token per character, exactly inverting ``detokenize``.
    """
    stream = _TokenStream()
    if not text.endswith("\n"):
        raise UnknownToken("sequence text must end with a newline")
    lines = text.split("\n")[:-1]
    if len(lines) < PROPERTY_SLOTS + 5:
        raise UnknownToken("sequence text is truncated")
    cursor = 0

    def next_line() -> tuple[str, int]:
        nonlocal cursor
        if cursor >= len(lines):
            raise UnknownToken("sequence text is truncated")
        cursor += 1
        return lines[cursor - 1], cursor

    for _ in range(PROPERTY_SLOTS):
        line, no = next_line()
        value = _strip_keyword(line, "prop", no, stream)
        if value == UNKNOWN_PROP:
            stream.emit(UNKNOWN_PROP)
        else:
            _emit_integer(value, no, stream)
        stream.newline()

    line, no = next_line()
    _emit_formula(_strip_keyword(line, "formula", no, stream), no, stream)
    stream.newline()

    line, no = next_line()
    label = _strip_keyword(line, "space_group_symbol", no, stream)
    if label not in _LABEL_SET:
        raise UnknownToken(f"line {no}: unknown space-group label {label!r}")
    stream.emit(label)
    stream.newline()

    line, no = next_line()
    count_text = _strip_keyword(line, "operations", no, stream)
    _emit_integer(count_text, no, stream)
    stream.newline()
    for _ in range(int(count_text)):
        line, no = next_line()
        if not line or any(ch not in _TRIPLET_SET for ch in line):
            raise UnknownToken(f"line {no}: invalid triplet characters in {line!r}")
        stream.emit_chars(line)
        stream.newline()

    line, no = next_line()
    body = _strip_keyword(line, "lattice_parameters", no, stream)
    for i, field in enumerate(_PARAM_FIELDS):
        prefix = field + ": "
        if not body.startswith(prefix):
            raise UnknownToken(f"line {no}: expected {field!r} in lattice parameters")
        stream.emit(field)
        stream.emit(":")
        stream.emit(" ")
        body = body[len(prefix):]
        end = 0
        while end < len(body) and body[end] in _REAL_CHARS:
            end += 1
        _emit_real(body[:end], no, stream)
        body = body[end:]
        if i < len(_PARAM_FIELDS) - 1:
            if not body.startswith(", "):
                raise UnknownToken(f"line {no}: expected ', ' between lattice parameters")
            stream.emit(",")
            stream.emit(" ")
            body = body[2:]
    if body:
        raise UnknownToken(f"line {no}: trailing text {body!r} in lattice parameters")
    stream.newline()

    line, no = next_line()
    count_text = _strip_keyword(line, "atoms", no, stream)
    _emit_integer(count_text, no, stream)
    stream.newline()
    for _ in range(int(count_text)):
        line, no = next_line()
        fields = line.split(" ")
        if len(fields) != 5:
            raise UnknownToken(f"line {no}: expected 'El mult x y z', got {line!r}")
        if fields[0] not in _ELEMENT_SET:
            raise UnknownToken(f"line {no}: unknown element token {fields[0]!r}")
        stream.emit(fields[0])
        stream.emit(" ")
        _emit_integer(fields[1], no, stream)
        for real in fields[2:]:
            stream.emit(" ")
            _emit_real(real, no, stream)
        stream.newline()

    if cursor != len(lines):
        raise UnknownToken(f"line {cursor + 1}: trailing content after the atom list")
    return stream.ids


def detokenize(token_ids) -> str:
    vocab = vocabulary()
    return "".join(vocab.token_for(int(t)) for t in token_ids)


# -- encoding ------------------------------------------------------------------

def encode(cell: CanonicalCell, property_bins=None) -> CrystalSequence:
    """Render a canonical cell as sequence text plus token ids.

    ``property_bins`` is an optional list of (name, bin) pairs filling the ten
    property slots in order; remaining slots emit ``unknown_prop``.  The output
    is deterministic: one cell always yields byte-identical text.
    """
    bins = list(property_bins or [])
    if len(bins) > PROPERTY_SLOTS:
        raise ValueOutOfRange(f"at most {PROPERTY_SLOTS} property bins are supported")
    for atom in cell.atoms:
        if atom.z not in ENCODABLE_Z:
            raise UnsupportedElement(
                f"element {symbol_for(atom.z)} (Z={atom.z}) is outside the vocabulary")
    for label, value in (("operation count", len(cell.operations)),
                         ("atom count", len(cell.atoms)),
                         ("cell size", cell.n_atoms),
                         *((f"multiplicity of {symbol_for(a.z)}", a.multiplicity)
                           for a in cell.atoms),
                         *((f"property bin {name!r}", b) for name, b in bins)):
        if not 0 <= value <= MAX_INTEGER_TOKEN:
            raise ValueOutOfRange(f"{label} {value} outside 0..{MAX_INTEGER_TOKEN}")

    lines = []
    slots = [str(int(b)) for _, b in bins]
    slots += [UNKNOWN_PROP] * (PROPERTY_SLOTS - len(slots))
    lines.extend(f"prop: {slot}" for slot in slots)
    lines.append(f"formula: {cell.formula}")
    lines.append(f"space_group_symbol: {cell.space_group_label}")
    lines.append(f"operations: {len(cell.operations)}")
    lines.extend(operation_to_triplet(op) for op in cell.operations)
    p = cell.params
    lines.append("lattice_parameters: " + ", ".join(
        f"{name}: {quantize(value)}" for name, value in zip(_PARAM_FIELDS, p.as_tuple())))
    lines.append(f"atoms: {len(cell.atoms)}")
    for atom in cell.atoms:
        coords = " ".join(quantize(c, wrap_unit=True) for c in atom.frac)
        lines.append(f"{symbol_for(atom.z)} {atom.multiplicity} {coords}")
    text = "\n".join(lines) + "\n"
    return CrystalSequence(text=text, tokens=tuple(tokenize(text)))


# -- decoding ------------------------------------------------------------------

_INT_RE = re.compile(r"(0|[1-9]\d*)$")
_REAL_PATTERN = r"\d+\.\d{4}"
_PROP_RE = re.compile(rf"prop: (unknown_prop|0|[1-9]\d*)$")
_FORMULA_RE = re.compile(r"formula: ([A-Za-z0-9]+)$")
_SGS_RE = re.compile(r"space_group_symbol: (\S+)$")
_OPS_RE = re.compile(r"operations: (0|[1-9]\d*)$")
_PARAMS_RE = re.compile(
    "lattice_parameters: " + ", ".join(
        rf"{field}: ({_REAL_PATTERN})" for field in _PARAM_FIELDS) + "$")
_ATOMS_RE = re.compile(r"atoms: (0|[1-9]\d*)$")
_ATOM_RE = re.compile(
    rf"([A-Z][a-z]?) ([1-9]\d*) ({_REAL_PATTERN}) ({_REAL_PATTERN}) ({_REAL_PATTERN})$")


class _LineReader:
    def __init__(self, text: str):
        self._lines = text.split("\n")
        self._cursor = 0

    @property
    def line_no(self) -> int:
        return self._cursor + 1

    def take(self, pattern: re.Pattern, expected: str) -> tuple[re.Match, int]:
        if self._cursor >= len(self._lines) or (
                self._cursor == len(self._lines) - 1 and self._lines[self._cursor] == ""):
            raise ParseError(f"unexpected end of text, expected {expected}",
                             self.line_no, expected=expected)
        line = self._lines[self._cursor]
        match = pattern.match(line)
        if not match or match.end() != len(line):
            column = (match.end() if match else 0) + 1
            raise ParseError(f"expected {expected}, got {line!r}", self.line_no,
                             column=column, expected=expected)
        self._cursor += 1
        return match, self._cursor

    def expect_end(self):
        remaining = self._lines[self._cursor:]
        if remaining != [""]:
            raise ParseError("trailing content after the atom list", self.line_no)


def _checked_int(text: str, line_no: int, what: str) -> int:
    value = int(text)
    if value > MAX_INTEGER_TOKEN:
        raise ParseError(f"{what} {value} exceeds {MAX_INTEGER_TOKEN}", line_no)
    return value


def decode(sequence: CrystalSequence | str) -> Crystal:
    """Rebuild the full crystal from sequence text.

    The lattice comes from the six parameters (fixed orientation convention)
    and the cell contents from applying every recorded operation to the
    irreducible atoms, with duplicate images merged.
    """
    text = sequence.text if isinstance(sequence, CrystalSequence) else sequence
    reader = _LineReader(text)
    for _ in range(PROPERTY_SLOTS):
        match, no = reader.take(_PROP_RE, "'prop: <int|unknown_prop>'")
        if match.group(1) != UNKNOWN_PROP:
            _checked_int(match.group(1), no, "property bin")
    reader.take(_FORMULA_RE, "'formula: <composition>'")
    match, no = reader.take(_SGS_RE, "'space_group_symbol: <label>'")
    if match.group(1) not in _LABEL_SET:
        raise ParseError(f"unknown space-group label {match.group(1)!r}", no)
    match, no = reader.take(_OPS_RE, "'operations: <count>'")
    n_ops = _checked_int(match.group(1), no, "operation count")
    operations = []
    triplet_re = re.compile(r"\S+$")
    for _ in range(n_ops):
        match, no = reader.take(triplet_re, "an xyz triplet")
        operations.append(triplet_to_operation(match.group(0), line=no))
    match, no = reader.take(_PARAMS_RE, "the lattice_parameters line")
    try:
        params = LatticeParameters(*(float(g) for g in match.groups()))
    except DegenerateLattice as exc:
        raise ParseError(f"unrealizable lattice parameters ({exc})", no) from exc
    match, no = reader.take(_ATOMS_RE, "'atoms: <count>'")
    n_atoms = _checked_int(match.group(1), no, "atom count")
    if n_atoms == 0:
        raise ParseError("atom count must be at least 1", no)
    atoms = []
    for _ in range(n_atoms):
        match, no = reader.take(_ATOM_RE, "'<El> <mult> <x> <y> <z>'")
        symbol, mult_text, *coords = match.groups()
        if symbol not in _ELEMENT_SET:
            raise ParseError(f"element {symbol!r} is outside the vocabulary", no)
        mult = _checked_int(mult_text, no, "multiplicity")
        try:
            z = z_for(symbol)
        except UnknownElement as exc:
            raise ParseError(str(exc), no) from exc
        atoms.append(IrreducibleAtom(z, np.array([float(c) for c in coords]), mult))
    reader.expect_end()
    return materialize(params, atoms, operations)


def materialize(params: LatticeParameters, atoms: list[IrreducibleAtom],
                operations: list[SymmetryOperation]) -> Crystal:
    """Expand irreducible atoms into a full ``Crystal`` (shared by decode paths)."""
    for atom in atoms:
        orbit = expand_orbit(atom.frac, operations)
        if len(orbit) != atom.multiplicity:
            raise MultiplicityMismatch(
                f"{symbol_for(atom.z)} at {np.round(atom.frac, 4)} declares multiplicity "
                f"{atom.multiplicity} but expands to {len(orbit)} sites")
    sites = reconstruct_full_cell(atoms, operations)
    if len(sites) != sum(a.multiplicity for a in atoms):
        raise MultiplicityMismatch(
            "orbits of distinct irreducible atoms overlap after reconstruction")
    species = [z for z, _ in sites]
    frac = np.array([f for _, f in sites])
    return Crystal(species, frac, lattice_from_params(params))


def cell_to_crystal(cell: CanonicalCell) -> Crystal:
    """Materialize the full unit cell described by a canonical cell."""
    return materialize(cell.params, list(cell.atoms), list(cell.operations))
