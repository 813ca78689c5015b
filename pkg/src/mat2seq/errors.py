"""Exception types shared across the package."""


class Mat2SeqError(Exception):
    """Base class for every error raised by this package."""


class DegenerateLattice(Mat2SeqError):
    """Lattice vectors are collinear/coplanar, or an angle triple is unrealizable."""


class NonConvergence(Mat2SeqError):
    """Iterative lattice reduction did not settle within the step budget."""


class InconsistentSupercell(Mat2SeqError):
    """Pure translations were detected but the atom count does not divide evenly."""


class CifError(Mat2SeqError):
    """Base class for CIF ingestion problems."""


class MissingField(CifError):
    """A required CIF tag is absent."""


class PartialOccupancy(CifError):
    """A site occupancy differs from 1.0; disordered materials are unsupported."""


class MalformedLoop(CifError):
    """A CIF loop or value could not be interpreted."""


class UnknownElement(CifError):
    """An atom site names an element symbol outside the periodic table."""


class GroupClosureFailure(Mat2SeqError):
    """Detected operation set is not closed; usually a tolerance inconsistency."""


class OrbitInconsistency(Mat2SeqError):
    """Orbit sizes do not divide the group order, or an operation fails to permute atoms."""


class SpeciesClash(Mat2SeqError):
    """Two sites of different species deduplicate to the same position."""


class DuplicateAtom(Mat2SeqError):
    """Two atoms compare equal under the canonical ordering key."""


class UnsupportedElement(Mat2SeqError):
    """Species outside the sequence vocabulary cannot be encoded."""


class ValueOutOfRange(Mat2SeqError):
    """An integer field exceeds the vocabulary bound of 300."""


class NegativeValue(Mat2SeqError):
    """Property values must be non-negative before binning."""


class MultiplicityMismatch(Mat2SeqError):
    """Declared multiplicities disagree with reconstructed orbit sizes."""


class UnknownToken(Mat2SeqError):
    """Text contains a fragment with no vocabulary token."""


class ParseError(Mat2SeqError):
    """Sequence text violates the grammar.

    Carries the 1-based ``line`` and ``column`` of the offending position and
    a short description of what was ``expected`` there.
    """

    def __init__(self, message: str, line: int, column: int = 1, expected: str | None = None):
        self.line = line
        self.column = column
        self.expected = expected
        super().__init__(f"line {line}, column {column}: {message}")
