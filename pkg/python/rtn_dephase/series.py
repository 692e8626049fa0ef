"""Sampled measures on a grid, with CSV data files and JSON metadata sidecars."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
)

import numpy as np
import orjson

from .errors import ContractViolationError
from .spectral import DecoherenceFunction

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DECOHERENCE_COLUMNS = ("t", "abs_D", "re_D", "im_D", "phi", "gamma")
MAP_COLUMNS = ("kappa", "a0", "N", "N_scaled")
ENTANGLEMENT_COLUMNS = (
    "t",
    "abs_D",
    "concurrence",
    "bell",
    "paper_variant_concurrence",
    "paper_variant_bell",
)

RATE_OMIT_TOL = 1e-12
JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_SORT_KEYS


def format_value(x: float) -> str:
    """17 significant digits; NaN becomes an empty field."""
    if np.isnan(x):
        return ""
    return f"{x:.17g}"


@dataclass(frozen=True, eq=False)
class MeasureSeries:
    """Rows of named columns plus free-form metadata for the JSON sidecar."""

    columns: Tuple[str, ...]
    values: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != len(self.columns):
            raise ContractViolationError(
                f"values of shape {arr.shape} do not match columns {self.columns}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(f"no column {name!r} in {self.columns}") from None

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.values:
            lines.append(",".join(format_value(x) for x in row))
        return "\n".join(lines) + "\n"

    def metadata_json(self) -> bytes:
        return orjson.dumps(self.metadata, option=JSON_OPTIONS)

    def write(self, path: Path, sidecar: bool = True) -> List[Path]:
        """Write ``path`` and, if requested, ``path`` with a ``.json`` suffix."""
        path = Path(path)
        path.write_text(self.to_csv(), encoding="utf-8")
        written = [path]
        if sidecar:
            meta_path = path.with_suffix(".json")
            meta_path.write_bytes(self.metadata_json())
            written.append(meta_path)
        logger.info("wrote %s", ", ".join(str(p) for p in written))
        return written


def gather(
    func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None
) -> List[R]:
    """Map ``func`` over ``items``; results come back in input order."""
    items = list(items)
    if not workers or workers <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def spectrum_metadata(df: DecoherenceFunction) -> Dict[str, Any]:
    return {
        "params": df.params.model_dump(),
        "roots": [[r.real, r.imag] for r in df.roots],
        "powers": list(df.powers),
        "confluent": df.is_confluent,
    }


def decoherence_series(df: DecoherenceFunction, grid: Sequence[float]) -> MeasureSeries:
    """|D|, Re D, Im D and the rates phi, gamma on a time grid.

    Rates are left empty where |D| < RATE_OMIT_TOL, since they diverge there.
    """
    t = np.asarray(grid, dtype=float)
    d_r, d_i, dd_r, dd_i = df.components(t)
    mag2 = d_r * d_r + d_i * d_i
    mag = np.sqrt(mag2)
    keep = mag >= RATE_OMIT_TOL
    safe = np.where(keep, mag2, 1.0)
    phi = np.where(keep, -(d_r * dd_i - d_i * dd_r) / safe, np.nan)
    gamma = np.where(keep, -(d_r * dd_r + d_i * dd_i) / safe, np.nan)
    values = np.column_stack([t, mag, d_r, d_i, phi, gamma])
    return MeasureSeries(DECOHERENCE_COLUMNS, values, spectrum_metadata(df))


def map_series(
    rows: Sequence[Tuple[float, float, float]],
    metadata: Optional[Dict[str, Any]] = None,
) -> MeasureSeries:
    """kappa, a0, N rows; ``N_scaled = N/(N+1)`` is appended."""
    arr = np.asarray(rows, dtype=float).reshape(-1, 3)
    scaled = arr[:, 2] / (arr[:, 2] + 1.0)
    return MeasureSeries(MAP_COLUMNS, np.column_stack([arr, scaled]), metadata or {})
