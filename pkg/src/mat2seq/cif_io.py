"""Minimal CIF subset: enough to ingest MP-20 style files and write P1 cells.

Supported tags: ``data_*``, the six cell parameters, an optional
``_symmetry_equiv_pos_as_xyz`` loop, and an atom-site loop with fractional
coordinates.  Cartesian site coordinates, multi-line text fields and the rest
of the CIF grammar are out of scope.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field

import numpy as np

from .core import Crystal, LatticeParameters, lattice_from_params, min_image_delta, wrap_frac
from .elements import symbol_for, z_for
from .errors import MalformedLoop, MissingField, PartialOccupancy
from .symmetry import reconstruct_full_cell, triplet_to_operation
from .core import IrreducibleAtom

_CELL_TAGS = ("_cell_length_a", "_cell_length_b", "_cell_length_c",
              "_cell_angle_alpha", "_cell_angle_beta", "_cell_angle_gamma")
_SITE_DEDUP_TOL = 1e-4
_OCCUPANCY_TOL = 1e-6


@dataclass
class CifDocument:
    """Raw parse of one data block before structure interpretation."""

    data_block_name: str = ""
    fields: dict[str, str] = field(default_factory=dict)
    atom_site_loop: list[tuple[str, str, float, float, float, float]] = field(default_factory=list)
    symmetry_ops_loop: list[str] | None = None


def _split_words(line: str) -> list[str]:
    lexer = shlex.shlex(line, posix=True)
    lexer.whitespace_split = True
    lexer.commenters = "#"
    try:
        return list(lexer)
    except ValueError as exc:
        raise MalformedLoop(f"unbalanced quoting in line {line!r}") from exc


def _parse_float(tag: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise MalformedLoop(f"value {raw!r} for {tag} is not numeric") from exc


def parse_cif_document(text: str) -> CifDocument:
    doc = CifDocument()
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        words = _split_words(lines[i])
        if not words:
            i += 1
            continue
        head = words[0]
        if head.startswith(";"):
            raise MalformedLoop("multi-line text fields are unsupported")
        if head.startswith("data_"):
            doc.data_block_name = head[len("data_"):]
            i += 1
            continue
        if head == "loop_":
            i += 1
            tags = []
            while i < len(lines):
                tag_words = _split_words(lines[i])
                if len(tag_words) == 1 and tag_words[0].startswith("_"):
                    tags.append(tag_words[0])
                    i += 1
                else:
                    break
            if not tags:
                raise MalformedLoop("loop_ without column tags")
            rows: list[str] = []
            while i < len(lines):
                row_words = _split_words(lines[i])
                if not row_words:
                    i += 1
                    continue
                if row_words[0].startswith(("_", "loop_", "data_")):
                    break
                rows.extend(row_words)
                i += 1
            if len(rows) % len(tags) != 0:
                raise MalformedLoop(
                    f"loop with columns {tags} has {len(rows)} values, "
                    f"not a multiple of {len(tags)}")
            _store_loop(doc, tags, rows)
            continue
        if head.startswith("_"):
            if len(words) < 2:
                raise MalformedLoop(f"tag {head} has no value")
            doc.fields[head] = words[1]
            i += 1
            continue
        raise MalformedLoop(f"unexpected content {lines[i]!r}")
    for tag in _CELL_TAGS:
        if tag not in doc.fields:
            raise MissingField(f"required tag {tag} is absent")
    if not doc.atom_site_loop:
        raise MissingField("atom site loop is absent or empty")
    return doc


def _store_loop(doc: CifDocument, tags: list[str], values: list[str]):
    n_cols = len(tags)
    rows = [values[k:k + n_cols] for k in range(0, len(values), n_cols)]
    if "_symmetry_equiv_pos_as_xyz" in tags:
        col = tags.index("_symmetry_equiv_pos_as_xyz")
        doc.symmetry_ops_loop = [row[col] for row in rows]
        return
    if any(tag.startswith("_atom_site_Cartn") for tag in tags):
        raise MalformedLoop("Cartesian atom sites are unsupported; use fractional")
    if any(tag.startswith("_atom_site_") for tag in tags):
        for needed in ("_atom_site_fract_x", "_atom_site_fract_y", "_atom_site_fract_z"):
            if needed not in tags:
                raise MissingField(f"atom site loop lacks {needed}")
        index = {tag: tags.index(tag) for tag in tags}

        def cell(row, tag, default=None):
            if tag in index:
                return row[index[tag]]
            return default

        for row in rows:
            label = cell(row, "_atom_site_label", "")
            symbol = cell(row, "_atom_site_type_symbol") or label
            if not symbol:
                raise MissingField("atom site loop lacks both label and type symbol")
            occupancy = _parse_float("_atom_site_occupancy",
                                     cell(row, "_atom_site_occupancy", "1.0"))
            doc.atom_site_loop.append((
                label, symbol,
                _parse_float("_atom_site_fract_x", cell(row, "_atom_site_fract_x")),
                _parse_float("_atom_site_fract_y", cell(row, "_atom_site_fract_y")),
                _parse_float("_atom_site_fract_z", cell(row, "_atom_site_fract_z")),
                occupancy,
            ))
        return
    # Unrecognized loops (e.g. publication metadata) are ignored.


def parse_cif(text: str) -> Crystal:
    """Parse CIF text into a full unit cell.

    Symmetry operations from the ops loop, when present, are applied to expand
    the listed sites; coincident images are merged within 1e-4 fractional.
    Every site must have occupancy 1.0.
    """
    doc = parse_cif_document(text)
    for label, symbol, *_rest, occupancy in doc.atom_site_loop:
        if abs(occupancy - 1.0) > _OCCUPANCY_TOL:
            raise PartialOccupancy(
                f"site {label or symbol!r} has occupancy {occupancy}; "
                "disordered materials are unsupported")
    params = LatticeParameters(*(float(doc.fields[tag]) for tag in _CELL_TAGS))
    lattice = lattice_from_params(params)
    sites = [(z_for(symbol or label), np.array([x, y, z]))
             for label, symbol, x, y, z, _ in doc.atom_site_loop]
    if doc.symmetry_ops_loop:
        ops = [triplet_to_operation(s, line=k + 1) for k, s in enumerate(doc.symmetry_ops_loop)]
        seeds = [IrreducibleAtom(z, frac, 1) for z, frac in sites]
        sites = reconstruct_full_cell(seeds, ops, tol=_SITE_DEDUP_TOL)
    else:
        deduped: list[tuple[int, np.ndarray]] = []
        for z, frac in sites:
            frac = wrap_frac(frac)
            if not any(np.linalg.norm(min_image_delta(frac, other)) <= _SITE_DEDUP_TOL
                       for _, other in deduped):
                deduped.append((z, frac))
        sites = deduped
    return Crystal([z for z, _ in sites], np.array([f for _, f in sites]), lattice)


def write_cif(crystal: Crystal) -> str:
    """Emit a P1 CIF listing every atom, with 6-decimal fixed-point values."""
    from .core import params_from_lattice, reduced_formula

    params = params_from_lattice(crystal.lattice)
    lines = [f"data_{reduced_formula(crystal.species)}"]
    lines.append("_symmetry_space_group_name_H-M 'P 1'")
    for tag, value in zip(_CELL_TAGS, params.as_tuple()):
        lines.append(f"{tag} {value:.6f}")
    lines.append("loop_")
    lines.append("_symmetry_equiv_pos_as_xyz")
    lines.append("x,y,z")
    lines.append("loop_")
    lines.append("_atom_site_label")
    lines.append("_atom_site_type_symbol")
    lines.append("_atom_site_fract_x")
    lines.append("_atom_site_fract_y")
    lines.append("_atom_site_fract_z")
    lines.append("_atom_site_occupancy")
    for k in range(crystal.n):
        symbol = symbol_for(int(crystal.species[k]))
        x, y, z = crystal.frac_positions[k]
        lines.append(f"{symbol}{k} {symbol} {x:.6f} {y:.6f} {z:.6f} 1.000000")
    return "\n".join(lines) + "\n"
