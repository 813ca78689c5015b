"""Periodic table lookups and the encodable element subset."""

from .errors import UnknownElement

# Index == atomic number; index 0 is a placeholder.
SYMBOLS = (
    None,
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm",
    "Md", "No", "Lr",
)

Z_BY_SYMBOL = {symbol: z for z, symbol in enumerate(SYMBOLS) if symbol}

MAX_ATOMIC_NUMBER = len(SYMBOLS) - 1

# The 89 species the sequence vocabulary supports: H..Bi plus Ac..Pu.
ENCODABLE_Z = frozenset(range(1, 84)) | frozenset(range(89, 95))
ENCODABLE_SYMBOLS = tuple(sorted(SYMBOLS[z] for z in ENCODABLE_Z))


def symbol_for(z: int) -> str:
    if not 1 <= z <= MAX_ATOMIC_NUMBER:
        raise UnknownElement(f"atomic number {z} out of range 1..{MAX_ATOMIC_NUMBER}")
    return SYMBOLS[z]


def z_for(symbol: str) -> int:
    """Atomic number for a symbol; tolerant of stray case and charge suffixes."""
    cleaned = "".join(ch for ch in symbol if ch.isalpha())
    normalized = cleaned[:1].upper() + cleaned[1:].lower()
    for candidate in (normalized, normalized[:2], normalized[:1]):
        z = Z_BY_SYMBOL.get(candidate)
        if z is not None:
            return z
    raise UnknownElement(f"unknown element symbol {symbol!r}")
