"""Exception types shared across the package."""


class TabarmError(Exception):
    """Base class for all tabarm errors."""


class CsvParseError(TabarmError):
    """Malformed CSV input (ragged row, missing header, bad value)."""


class EmptyDatasetError(TabarmError):
    """A dataset with no usable rows or columns."""


class EmbeddingFormatError(TabarmError):
    """An embedding exchange file violating the EMBEDV1 format."""
