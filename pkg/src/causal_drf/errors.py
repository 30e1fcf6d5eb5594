"""Exception hierarchy for causal_drf."""


class CausalDRFError(Exception):
    """Base class for all causal_drf errors."""


class DimensionMismatch(CausalDRFError):
    """Array shapes are incompatible with the requested operation."""


class LengthMismatch(CausalDRFError):
    """Two sequences that must align have different lengths."""


class AllPointsIdentical(CausalDRFError):
    """The median pairwise distance is zero, so no bandwidth can be chosen."""


class EmptyTreatmentArm(CausalDRFError):
    """A candidate node side contains no observation from one treatment arm."""


class InsufficientData(CausalDRFError):
    """Not enough observations per treatment arm to satisfy the leaf floor."""


class InvalidConfig(CausalDRFError):
    """A forest configuration violates its invariants."""


class MissingColumn(CausalDRFError):
    """A referenced CSV column is absent from the header."""


class ParseError(CausalDRFError):
    """A CSV cell could not be parsed; carries (row, column) context."""

    def __init__(self, row: int, column: str, message: str = ""):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column {column!r}: {message or 'unparseable value'}")


class NonBinaryTreatment(CausalDRFError):
    """A treatment cell is not 0 or 1."""


class SchemaVersionMismatch(CausalDRFError):
    """A model file carries an unsupported schema tag."""


class CorruptModel(CausalDRFError):
    """A model file fails its integrity check."""
