# similarity/core.py
"""
Grids, sampled fields and the small numeric kernels shared by the three
applications: grid construction, second-order differentiation and the CSV
interchange format.
"""
import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from .exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

# 12 significant digits: one leading digit plus 11 decimals in e-notation
CSV_FLOAT_FORMAT = '{:.11e}'


def _frozen(values):
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Strictly increasing, finite coordinates along one axis"""
    points: np.ndarray
    name: str = 'x'

    def __post_init__(self):
        points = _frozen(self.points)
        if points.ndim != 1 or points.size < 2:
            raise InvalidArgumentError(
                f"Grid '{self.name}' needs at least 2 points", field=self.name)
        if not np.all(np.isfinite(points)):
            raise InvalidArgumentError(
                f"Grid '{self.name}' has non-finite points", field=self.name)
        if not np.all(np.diff(points) > 0):
            raise InvalidArgumentError(
                f"Grid '{self.name}' is not strictly increasing", field=self.name)
        object.__setattr__(self, 'points', points)

    @classmethod
    def from_points(cls, points: Iterable[float], name: str = 'x') -> 'Grid1D':
        return cls(np.asarray(list(points), dtype=float), name=name)

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        if not isinstance(other, Grid1D):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.name, self.points.tobytes()))

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.points)

    def renamed(self, name: str) -> 'Grid1D':
        return Grid1D(self.points, name=name)

    def scaled(self, factor: float, shift: float = 0.0) -> 'Grid1D':
        """Affine image factor * p + shift (factor > 0 keeps the ordering)"""
        return Grid1D(factor * self.points + shift, name=self.name)


GridLike = Union[Grid1D, Tuple[Grid1D, Grid1D]]


@dataclass(frozen=True, eq=False)
class ScalarField:
    """
    Values of one scalar quantity on a 1-D grid or on the tensor product of
    two grids. 2-D values are stored row-major with the first grid slowest.
    """
    grid: GridLike
    values: np.ndarray
    label: str
    masked: bool = False

    def __post_init__(self):
        values = _frozen(self.values)
        shape = self.shape
        if values.shape != shape:
            raise InvalidArgumentError(
                f"Field '{self.label}' has shape {values.shape}, grid expects {shape}",
                field=self.label)
        if not self.masked and not np.all(np.isfinite(values)):
            raise InvalidArgumentError(
                f"Field '{self.label}' has non-finite values", field=self.label)
        object.__setattr__(self, 'values', values)

    @property
    def axes(self) -> Tuple[Grid1D, ...]:
        return self.grid if isinstance(self.grid, tuple) else (self.grid,)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(axis) for axis in self.axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def same_grid(self, other: 'ScalarField') -> bool:
        return self.ndim == other.ndim and all(
            a == b for a, b in zip(self.axes, other.axes))

    def relabel(self, label: str) -> 'ScalarField':
        return ScalarField(self.grid, self.values, label, self.masked)


def linspace(a: float, b: float, n: int, name: str = 'x') -> Grid1D:
    """n equally spaced points, first = a and last = b exactly"""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidArgumentError(f"linspace bounds must be finite, got ({a}, {b})", field=name)
    if int(n) != n or n < 2:
        raise InvalidArgumentError(f"linspace needs n >= 2, got {n}", field=name)
    if not a < b:
        raise InvalidArgumentError(f"linspace needs a < b, got ({a}, {b})", field=name)
    points = np.linspace(a, b, int(n))
    points[-1] = b
    return Grid1D(points, name=name)


def central_derivative(field: ScalarField, axis: int = 0) -> ScalarField:
    """
    Derivative along one axis: second-order central differences in the
    interior, one-sided second-order stencils at both ends.
    """
    if axis < 0 or axis >= field.ndim:
        raise InvalidArgumentError(f"axis {axis} out of range for {field.ndim}-D field")
    grid = field.axes[axis]
    if len(grid) < 3:
        raise InvalidArgumentError(
            f"central_derivative needs >= 3 points along axis {axis}, got {len(grid)}")
    derivative = np.gradient(field.values, grid.points, axis=axis, edge_order=2)
    return ScalarField(field.grid, derivative, f"d{field.label}/d{grid.name}", field.masked)


def _format(value: float) -> str:
    return CSV_FLOAT_FORMAT.format(float(value))


def _open_sink(destination):
    if isinstance(destination, (str, Path)):
        path = Path(destination)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open('w', newline=''), True
    return destination, False


def write_table(header: Sequence[str], rows: Iterable[Sequence], destination) -> None:
    """Header row then data rows; floats rendered with 12 significant digits"""
    sink, owned = _open_sink(destination)
    try:
        writer = csv.writer(sink, lineterminator='\n')
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([
                _format(cell) if isinstance(cell, (float, np.floating)) else cell
                for cell in row
            ])
    except OSError as e:
        logger.error(f"Failed writing CSV to {destination}: {e}")
        raise
    finally:
        if owned:
            sink.close()


def write_csv(fields: List[ScalarField], destination) -> None:
    """
    Write fields sharing one grid: coordinate columns first, then one column
    per field label. 2-D grids emit one row per point, outer axis slowest.
    """
    if not fields:
        raise InvalidArgumentError("write_csv needs at least one field")
    first = fields[0]
    for other in fields[1:]:
        if not other.same_grid(first):
            raise InvalidArgumentError(
                f"Field '{other.label}' is not on the grid of '{first.label}'",
                field=other.label)

    axes = first.axes
    header = [axis.name for axis in axes] + [f.label for f in fields]
    coordinates = np.meshgrid(*[axis.points for axis in axes], indexing='ij')
    columns = [c.ravel() for c in coordinates] + [f.values.ravel() for f in fields]
    rows = (tuple(float(column[i]) for column in columns) for i in range(columns[0].size))
    write_table(header, rows, destination)
    logger.debug(f"Wrote {columns[0].size} rows x {len(header)} columns")


def read_csv(source) -> Tuple[List[str], np.ndarray]:
    """Parse a file written by write_csv/write_table back into (header, values)"""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    data = np.array([[float(cell) for cell in row] for row in reader if row], dtype=float)
    return header, data.reshape(-1, len(header))


@dataclass(frozen=True)
class ResidualReport:
    """
    Norms of one equation's residual over a sample set. `scale` is the
    largest term magnitude seen, so `relative` is comparable across
    rescaled problems. l2_norm is the root-mean-square over the samples.
    """
    equation: str
    max_norm: float
    l2_norm: float
    grid_spacing: Tuple[float, ...]
    samples: int
    scale: float = 1.0
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.samples < 1:
            raise InvalidArgumentError("a residual report needs at least one sample", field='samples')
        # NaN is kept so a broken evaluation shows up as a failed check
        if self.max_norm < 0 or self.l2_norm < 0:
            raise InvalidArgumentError(f"residual norms must be non-negative for {self.equation}")

    @classmethod
    def from_values(cls, equation: str, residual, grid_spacing=(), scale: float = 1.0,
                    flags=()) -> 'ResidualReport':
        residual = np.abs(np.asarray(residual, dtype=float)).ravel()
        return cls(
            equation=equation,
            max_norm=float(residual.max()) if residual.size else 0.0,
            l2_norm=float(np.sqrt(np.mean(residual ** 2))) if residual.size else 0.0,
            grid_spacing=tuple(float(h) for h in grid_spacing),
            samples=max(int(residual.size), 1),
            scale=float(scale),
            flags=tuple(flags),
        )

    @property
    def relative(self) -> float:
        return self.max_norm / self.scale if self.scale > 0 else self.max_norm

    def passes(self, threshold: float, relative: bool = False) -> bool:
        value = self.relative if relative else self.max_norm
        return bool(np.isfinite(value)) and value <= threshold
