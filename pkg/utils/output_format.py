"""
Defines the OutputFormat enumeration for the files a simulation run writes.

The supported formats are:
- CSV: the full per-step trace
- SVG: tracking plots shaded by mission phase
- JSON: the summary metrics
- ALL: every format above
"""
from enum import Enum
from typing import Iterable, List


class OutputFormat(Enum):
    """
    Enum for output file formats.

    """
    CSV = "csv"
    SVG = "svg"
    JSON = "json"
    ALL = "all"

    @classmethod
    def expand(cls, names: Iterable[str]) -> List["OutputFormat"]:
        """Resolve names to concrete formats, ALL standing for every format."""
        selected = {cls(name) for name in names}
        if cls.ALL in selected:
            return [cls.CSV, cls.SVG, cls.JSON]
        return [f for f in (cls.CSV, cls.SVG, cls.JSON) if f in selected]
