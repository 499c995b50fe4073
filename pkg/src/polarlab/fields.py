"""Grids, fields, finite-difference stencils and the amplitude/phase split.

Everything downstream works on a uniform 1D grid.  Fields carry their grid
and a plain numpy array; the stencil helpers come in two flavours, one on
raw arrays (``diff1``/``diff2``) and one on fields (``d1``/``d2``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidConstantError, InvalidGridError

#: nodes with R < MASK_RATIO * max(R) have no trustworthy phase
MASK_RATIO = 1e-10


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid with ``n`` nodes from ``x_min`` to ``x_max`` inclusive."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise InvalidGridError(f"grid needs n >= 3 nodes, got {self.n}")
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise InvalidGridError("grid extent must be finite")
        if not self.x_max > self.x_min:
            raise InvalidGridError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def periodic(cls, x_min: float, length: float, n: int) -> Grid1D:
        """Grid for a periodic domain of the given length; the last node is
        one spacing short of ``x_min + length``."""
        return cls(x_min, x_min + length * (n - 1) / n, n)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    @property
    def period(self) -> float:
        """Length of the domain when the grid is used periodically."""
        return self.n * self.dx

    def refined(self, factor: int = 2) -> Grid1D:
        """Same extent, spacing divided by ``factor`` (old nodes are kept)."""
        return Grid1D(self.x_min, self.x_max, factor * (self.n - 1) + 1)

    def refined_periodic(self, factor: int = 2) -> Grid1D:
        return Grid1D.periodic(self.x_min, self.period, factor * self.n)


def _as_values(grid, values, dtype):
    arr = np.array(values, dtype=dtype)
    if arr.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} values, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("field values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RealField1D:
    grid: Grid1D
    values: np.ndarray
    mask: np.ndarray | None = None  # True marks flagged nodes (value is a placeholder)

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.grid, self.values, np.float64))
        if self.mask is not None:
            mask = np.array(self.mask, dtype=bool)
            if mask.shape != (self.grid.n,):
                raise ValueError("mask must have one entry per node")
            object.__setattr__(self, "mask", mask)

    @classmethod
    def from_function(cls, grid: Grid1D, func) -> RealField1D:
        return cls(grid, func(grid.x))

    def __len__(self):
        return self.grid.n


@dataclass(frozen=True, eq=False)
class ComplexField1D:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.grid, self.values, np.complex128))

    @classmethod
    def from_function(cls, grid: Grid1D, func) -> ComplexField1D:
        return cls(grid, func(grid.x))

    def norm(self) -> float:
        """Discrete norm sum |psi|^2 dx."""
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.dx)

    def __len__(self):
        return self.grid.n


@dataclass(frozen=True)
class Constants:
    """Physical constants plus the optional scale constants.

    ``lam`` (length) and ``p_lam`` (momentum) rescale the amplitude and the
    phase in the canonical formulation; ``C``, ``A`` and ``E`` are the
    integration constants of the special solutions.
    """

    hbar: float = 1.0
    m: float = 1.0
    c: float = 1.0
    lam: float | None = None
    p_lam: float | None = None
    C: float | None = None
    A: float | None = None
    E: float | None = None

    def __post_init__(self):
        for name in ("hbar", "c"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidConstantError(f"{name} must be finite and > 0, got {value}")
        if not (math.isfinite(self.m) and self.m >= 0):
            raise InvalidConstantError(f"m must be finite and >= 0, got {self.m}")
        for name in ("lam", "p_lam"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value > 0):
                raise InvalidConstantError(f"{name} must be finite and > 0, got {value}")

    @property
    def h(self) -> float:
        return 2.0 * math.pi * self.hbar

    @classmethod
    def canonical(cls, p_lam: float = 1.0, **kwargs) -> Constants:
        """Constants with lam = h / p_lam."""
        hbar = kwargs.get("hbar", 1.0)
        return cls(lam=2.0 * math.pi * hbar / p_lam, p_lam=p_lam, **kwargs)


# ---------------------------------------------------------------- stencils

def diff1(f: np.ndarray, dx: float) -> np.ndarray:
    """Second-order first derivative, one-sided second order at the ends."""
    f = np.asarray(f)
    if f.shape[-1] < 3:
        raise InvalidGridError("derivative stencils need at least 3 nodes")
    g = np.empty_like(f, dtype=np.result_type(f, np.float64))
    g[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * dx)
    g[..., 0] = (-3.0 * f[..., 0] + 4.0 * f[..., 1] - f[..., 2]) / (2.0 * dx)
    g[..., -1] = (3.0 * f[..., -1] - 4.0 * f[..., -2] + f[..., -3]) / (2.0 * dx)
    return g


_D2_EDGE4 = (
    np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0,
    np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12.0,
)


def diff2(f: np.ndarray, dx: float, order: int = 2) -> np.ndarray:
    """Second derivative.

    ``order=2`` is the 3-point stencil with one-sided second-order ends;
    ``order=4`` is the 5-point stencil with 6-point one-sided rows at the
    two outermost nodes on each side.
    """
    f = np.asarray(f)
    n = f.shape[-1]
    if n < 3:
        raise InvalidGridError("derivative stencils need at least 3 nodes")
    g = np.empty_like(f, dtype=np.result_type(f, np.float64))
    inv = 1.0 / (dx * dx)
    if order == 2:
        g[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) * inv
        if n >= 4:
            g[..., 0] = (2.0 * f[..., 0] - 5.0 * f[..., 1] + 4.0 * f[..., 2] - f[..., 3]) * inv
            g[..., -1] = (2.0 * f[..., -1] - 5.0 * f[..., -2] + 4.0 * f[..., -3] - f[..., -4]) * inv
        else:
            g[..., 0] = g[..., 1]
            g[..., -1] = g[..., -2]
        return g
    if order == 4:
        if n < 6:
            raise InvalidGridError("fourth-order stencil needs at least 6 nodes")
        g[..., 2:-2] = (
            -f[..., 4:] + 16.0 * f[..., 3:-1] - 30.0 * f[..., 2:-2] + 16.0 * f[..., 1:-3] - f[..., :-4]
        ) * (inv / 12.0)
        head = f[..., :6]
        tail = f[..., -6:][..., ::-1]
        for i, w in enumerate(_D2_EDGE4):
            g[..., i] = (head @ w) * inv
            g[..., n - 1 - i] = (tail @ w) * inv
        return g
    raise ValueError(f"unsupported stencil order {order}")


def _field_like(f, values):
    if np.iscomplexobj(values):
        return ComplexField1D(f.grid, values)
    return RealField1D(f.grid, values)


def d1(f):
    """First derivative of a field (see ``diff1``)."""
    return _field_like(f, diff1(f.values, f.grid.dx))


def d2(f, order: int = 2):
    """Second derivative of a field (see ``diff2``)."""
    return _field_like(f, diff2(f.values, f.grid.dx, order))


# ------------------------------------------------------- polar decomposition

@dataclass(frozen=True, eq=False)
class PolarPair:
    R: RealField1D
    S: RealField1D
    node_mask: np.ndarray

    def __post_init__(self):
        if np.any(self.R.values < 0):
            raise ValueError("amplitude R must be non-negative")

    @property
    def grid(self) -> Grid1D:
        return self.R.grid

    @property
    def unmasked(self) -> np.ndarray:
        return ~self.node_mask


def node_mask(R: np.ndarray, threshold: float | None = None) -> np.ndarray:
    """Nodes whose amplitude is too small to carry a phase."""
    R = np.asarray(R)
    eps = MASK_RATIO * R.max(axis=-1, keepdims=True) if threshold is None else threshold
    return (R < eps) | (R == 0)


def grow_mask(mask: np.ndarray, width: int = 1) -> np.ndarray:
    """Also flag nodes within ``width`` of a masked node.

    Phase values on masked nodes are interpolated fill, so any stencil that
    reaches one is unreliable; residuals use the grown mask.
    """
    mask = np.asarray(mask, dtype=bool)
    out = mask.copy()
    for k in range(1, width + 1):
        out[k:] |= mask[:-k]
        out[:-k] |= mask[k:]
    return out


def _runs(flags):
    """(start, stop) index pairs of the maximal True runs of ``flags``."""
    edges = np.diff(np.concatenate(([0], flags.astype(np.int8), [0])))
    return zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1))


def _unwrapped_phase(values, x, mask):
    theta = np.angle(values)
    out = np.zeros(values.shape[0])
    good = ~mask
    for start, stop in _runs(good):
        out[start:stop] = np.unwrap(theta[start:stop])
    if mask.any() and good.any():
        out[mask] = np.interp(x[mask], x[good], out[good])
    return out


def decompose(psi: ComplexField1D, hbar: float, threshold: float | None = None) -> PolarPair:
    """Split psi into R = |psi| and a spatially unwrapped action S.

    S is unwrapped left to right inside each run of unmasked nodes; masked
    nodes (R below ``threshold``, default 1e-10 max R) get S interpolated
    from their neighbours and are flagged in ``node_mask``.
    """
    grid = psi.grid
    R = np.abs(psi.values)
    mask = node_mask(R, threshold)
    S = hbar * _unwrapped_phase(psi.values, grid.x, mask)
    return PolarPair(RealField1D(grid, R), RealField1D(grid, S, mask), mask)


def recompose(pair: PolarPair, hbar: float) -> ComplexField1D:
    return ComplexField1D(pair.grid, pair.R.values * np.exp(1j * pair.S.values / hbar))


@dataclass(frozen=True, eq=False)
class UWSplit:
    U: RealField1D
    W: RealField1D
    amplitude_error: float  # max |U^2 + W^2 - R^2|
    phase_error: float  # max |hbar atan2(W, U) - S| modulo 2 pi hbar, unmasked nodes


def wrap_action(dS: np.ndarray, hbar: float) -> np.ndarray:
    """Reduce an action difference into (-pi hbar, pi hbar]."""
    period = 2.0 * math.pi * hbar
    return dS - period * np.round(dS / period)


def split_uw(pair: PolarPair, hbar: float) -> UWSplit:
    R, S = pair.R.values, pair.S.values
    U = R * np.cos(S / hbar)
    W = R * np.sin(S / hbar)
    amp = float(np.max(np.abs(U * U + W * W - R * R)))
    good = pair.unmasked
    if good.any():
        back = hbar * np.arctan2(W[good], U[good])
        phase = float(np.max(np.abs(wrap_action(back - S[good], hbar))))
    else:
        phase = 0.0
    return UWSplit(RealField1D(pair.grid, U), RealField1D(pair.grid, W), amp, phase)


def polar_history(snapshots: np.ndarray, grid: Grid1D, hbar: float, threshold: float | None = None):
    """Decompose a stack of snapshots (time along axis 0).

    Each row is unwrapped in space, then every node is unwrapped in time by
    2 pi hbar multiples, so S is continuous in both directions.  Returns
    ``(R, S, mask)`` arrays of the stack's shape.
    """
    snapshots = np.asarray(snapshots)
    R = np.abs(snapshots)
    mask = node_mask(R, threshold)
    x = grid.x
    S = np.empty(R.shape)
    for k in range(snapshots.shape[0]):
        S[k] = _unwrapped_phase(snapshots[k], x, mask[k])
    S = hbar * np.unwrap(S, axis=0)
    return R, S, mask


# ----------------------------------------------------------------- reports

@dataclass(frozen=True, eq=False)
class ResidualReport:
    """Interior norms of a residual field (boundary and masked nodes excluded)."""

    name: str
    residual: np.ndarray
    max_norm: float
    l2_norm: float
    order: float | None = None
    tolerance: float | None = None
    warnings: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool | None:
        if self.tolerance is None:
            return None
        return bool(self.max_norm <= self.tolerance)

    def with_order(self, order: float) -> ResidualReport:
        return ResidualReport(self.name, self.residual, self.max_norm, self.l2_norm, order,
                              self.tolerance, self.warnings, self.extra)


def interior(n: int, mask: np.ndarray | None = None) -> np.ndarray:
    sel = np.zeros(n, dtype=bool)
    sel[1:-1] = True
    if mask is not None:
        sel &= ~np.asarray(mask, dtype=bool)
    return sel


def residual_report(name, residual, grid: Grid1D, *, mask=None, tolerance=None,
                    order=None, warnings=(), extra=None) -> ResidualReport:
    r = np.asarray(residual)
    sel = interior(grid.n, mask)
    vals = np.abs(r[sel])
    max_norm = float(vals.max()) if vals.size else 0.0
    l2 = float(np.sqrt(np.sum(vals ** 2) * grid.dx))
    return ResidualReport(name, r, max_norm, l2, order, tolerance, tuple(warnings), dict(extra or {}))


def observed_order(coarse: float, fine: float, ratio: float = 2.0, floor: float = 0.0) -> float:
    """log(coarse/fine)/log(ratio); ``inf`` when the fine error is at or below
    ``floor`` (the quantity is exact up to rounding on both levels)."""
    if fine <= floor:
        return math.inf
    if coarse <= 0.0:
        return -math.inf
    return math.log(coarse / fine) / math.log(ratio)


def vector_identity_residual(S, profile=None, floor: float = 0.0) -> ResidualReport:
    """Residual of d(S dS) - (dS)^2 - S d2S.

    The identity is exact, so only stencil error remains.  When ``profile``
    (a callable of x) is given it is sampled on the grid refined by two and
    the observed order is attached.
    """

    def _res(grid, s):
        ds = diff1(s, grid.dx)
        return diff1(s * ds, grid.dx) - ds * ds - s * diff2(s, grid.dx)

    grid = S.grid
    report = residual_report("vector_identity", _res(grid, S.values), grid)
    if profile is not None:
        fine = grid.refined()
        fine_norm = residual_report("vector_identity", _res(fine, profile(fine.x)), fine).max_norm
        report = report.with_order(observed_order(report.max_norm, fine_norm, floor=floor))
    return report


# ---------------------------------------------------------------------- CSV

def write_field_csv(path, f) -> None:
    """Write ``x,value`` (real) or ``x,re,im`` (complex) with 17 significant digits."""
    path = Path(path)
    x = f.grid.x
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(f, ComplexField1D):
            w.writerow(["x", "re", "im"])
            for xi, v in zip(x, f.values):
                w.writerow([f"{xi:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
        else:
            w.writerow(["x", "value"])
            for xi, v in zip(x, f.values):
                w.writerow([f"{xi:.17g}", f"{v:.17g}"])


def write_columns_csv(path, columns: dict) -> None:
    """Write equal-length named columns (first key first)."""
    names = list(columns)
    data = [np.asarray(columns[k]) for k in names]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([f"{v:.17g}" for v in row])


def read_field_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body])
    grid = Grid1D(data[0, 0], data[-1, 0], len(data))
    if header == ["x", "value"]:
        return RealField1D(grid, data[:, 1])
    if header == ["x", "re", "im"]:
        return ComplexField1D(grid, data[:, 1] + 1j * data[:, 2])
    raise ValueError(f"unrecognised field CSV header {header}")
