"""Uniform tensor-product grids and sampled scalar/vector fields.

Everything downstream (existence analysis, characteristic solutions, the
entropy solver, curve reconstruction) works on the types defined here.
Grids are value objects: immutable after construction and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContractViolation,
    DomainTooSmallError,
    NonFiniteInputError,
    NonIntegrableFieldError,
)


@dataclass(frozen=True)
class GridN:
    """Uniform grid on a box in 1, 2 or 3 dimensions.

    ``cells`` counts intervals per axis; a non-periodic axis carries
    ``cells + 1`` nodes (both endpoints), a periodic axis carries ``cells``
    nodes (the right endpoint wraps onto the left).
    """

    dim: int
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    cells: tuple[int, ...]
    periodic: tuple[bool, ...]

    def __post_init__(self):
        if not 1 <= self.dim <= 3:
            raise ContractViolation(f"dim must be 1..3, got {self.dim}")
        for name in ("lo", "hi", "cells", "periodic"):
            if len(getattr(self, name)) != self.dim:
                raise ContractViolation(f"{name} must have length {self.dim}")
        for a in range(self.dim):
            if not (np.isfinite(self.lo[a]) and np.isfinite(self.hi[a])):
                raise ContractViolation("grid bounds must be finite")
            if self.hi[a] <= self.lo[a]:
                raise ContractViolation("hi must exceed lo on every axis")
            if self.cells[a] < 4:
                raise ContractViolation("need at least 4 cells per axis")

    @classmethod
    def make(cls, lo, hi, cells, periodic=False):
        """Build a grid from scalars or per-axis sequences."""
        lo = tuple(float(v) for v in np.atleast_1d(lo))
        hi = tuple(float(v) for v in np.atleast_1d(hi))
        dim = len(lo)
        cells_arr = np.atleast_1d(cells)
        if cells_arr.size == 1:
            cells_arr = np.repeat(cells_arr, dim)
        per_arr = np.atleast_1d(periodic)
        if per_arr.size == 1:
            per_arr = np.repeat(per_arr, dim)
        return cls(
            dim=dim,
            lo=lo,
            hi=hi,
            cells=tuple(int(c) for c in cells_arr),
            periodic=tuple(bool(p) for p in per_arr),
        )

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            (self.hi[a] - self.lo[a]) / self.cells[a] for a in range(self.dim)
        )

    @property
    def node_counts(self) -> tuple[int, ...]:
        return tuple(
            self.cells[a] if self.periodic[a] else self.cells[a] + 1
            for a in range(self.dim)
        )

    def axis_nodes(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return self.lo[axis] + h * np.arange(self.node_counts[axis])

    def node_mesh(self) -> np.ndarray:
        """All node coordinates, shape ``node_counts + (dim,)``."""
        axes = [self.axis_nodes(a) for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def cell_centers(self, axis: int = 0) -> np.ndarray:
        h = self.spacing[axis]
        return self.lo[axis] + h * (0.5 + np.arange(self.cells[axis]))

    def anchor_index(self) -> tuple[int, ...]:
        """Index of the node nearest the origin (the gauge anchor)."""
        return tuple(
            int(np.argmin(np.abs(self.axis_nodes(a)))) for a in range(self.dim)
        )

    def node_position(self, index) -> np.ndarray:
        return np.array(
            [self.axis_nodes(a)[index[a]] for a in range(self.dim)]
        )


def _require_finite(arr, what: str):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError(f"{what} contains non-finite entries")


@dataclass(frozen=True)
class GraphSample:
    """Heights of a graph x_{n+1} = f(t, x) sampled at grid nodes.

    The height at the anchor node (nearest the origin) is stored explicitly
    so the integration gauge survives serialization round trips.
    """

    grid: GridN
    t: float
    heights: np.ndarray
    anchor_index: tuple[int, ...] = field(default=None)  # type: ignore[assignment]
    anchor_value: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=float)
        if h.shape != self.grid.node_counts:
            raise ContractViolation(
                f"heights shape {h.shape} != node counts {self.grid.node_counts}"
            )
        _require_finite(h, "heights")
        object.__setattr__(self, "heights", h)
        if self.anchor_index is None:
            object.__setattr__(self, "anchor_index", self.grid.anchor_index())
        if self.anchor_value is None:
            object.__setattr__(
                self, "anchor_value", float(h[tuple(self.anchor_index)])
            )


@dataclass(frozen=True)
class GradientFieldSample:
    """The evolving tangent field v sampled at grid nodes.

    ``values`` has shape ``node_counts + (dim,)``; entries carry slope units.
    """

    grid: GridN
    t: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        want = self.grid.node_counts + (self.grid.dim,)
        if v.shape != want:
            raise ContractViolation(f"values shape {v.shape} != {want}")
        _require_finite(v, "field values")
        object.__setattr__(self, "values", v)

    def component_range(self) -> float:
        """Largest node-to-node variation over all components."""
        return float(np.max(self.values) - np.min(self.values))


def _diff_axis(arr: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    """Second-order first derivative along one axis.

    Central differences in the interior; on non-periodic axes the two edge
    nodes use the one-sided three-point formula (also second order, exact
    for quadratics).
    """
    if periodic:
        return (np.roll(arr, -1, axis=axis) - np.roll(arr, 1, axis=axis)) / (2.0 * h)
    out = np.empty_like(arr)
    n = arr.shape[axis]
    sl = lambda i: tuple(  # noqa: E731
        slice(None) if a != axis else i for a in range(arr.ndim)
    )
    out[sl(slice(1, -1))] = (arr[sl(slice(2, n))] - arr[sl(slice(0, -2))]) / (2.0 * h)
    out[sl(0)] = (-3.0 * arr[sl(0)] + 4.0 * arr[sl(1)] - arr[sl(2)]) / (2.0 * h)
    out[sl(n - 1)] = (3.0 * arr[sl(n - 1)] - 4.0 * arr[sl(n - 2)] + arr[sl(n - 3)]) / (
        2.0 * h
    )
    return out


def fd_gradient(sample: GraphSample) -> GradientFieldSample:
    """Finite-difference gradient of a sampled graph, returned as a field."""
    grid = sample.grid
    _require_finite(sample.heights, "heights")
    comps = [
        _diff_axis(sample.heights, a, grid.spacing[a], grid.periodic[a])
        for a in range(grid.dim)
    ]
    return GradientFieldSample(grid=grid, t=sample.t, values=np.stack(comps, axis=-1))


def curl_residual(fieldsample: GradientFieldSample) -> np.ndarray:
    """Discrete curl tensor from the same stencils as :func:`fd_gradient`.

    Returns shape ``node_counts + (dim, dim)`` with entries
    d v_i / d x_j - d v_j / d x_i; identically zero arrays in 1-D.
    """
    grid = fieldsample.grid
    n = grid.dim
    shape = grid.node_counts
    out = np.zeros(shape + (n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dij = _diff_axis(
                fieldsample.values[..., i], j, grid.spacing[j], grid.periodic[j]
            )
            dji = _diff_axis(
                fieldsample.values[..., j], i, grid.spacing[i], grid.periodic[i]
            )
            out[..., i, j] = dij - dji
            out[..., j, i] = dji - dij
    return out


def max_curl_residual(fieldsample: GradientFieldSample):
    """Maximum |curl| entry and the node index where it occurs."""
    res = np.abs(curl_residual(fieldsample))
    flat = int(np.argmax(res))
    idx = np.unravel_index(flat, res.shape)
    return float(res[idx]), idx[: fieldsample.grid.dim]


def default_curl_tol(fieldsample: GradientFieldSample) -> float:
    """Scale-invariant curl tolerance: 1e-6 of the field's total variation
    across the grid (max minus min over all components), floored for
    near-constant fields."""
    return max(1e-6 * fieldsample.component_range(), 1e-12)


def mean_value(fieldsample: GradientFieldSample, mode: str = "periodic",
               edge_tol: float = 1e-6) -> float:
    """Large-interval mean of a 1-D slope field.

    ``periodic`` returns the period average (1/p) * integral of v, which the
    composite trapezoid rule computes to spectral accuracy on smooth periodic
    data (it reduces to the plain node average). ``L1`` checks that the
    truncated domain captured the decay and returns 0, the mean of any
    integrable slope.
    """
    grid = fieldsample.grid
    if grid.dim != 1:
        raise ContractViolation("mean_value is defined for 1-D fields")
    v = fieldsample.values[:, 0]
    if mode == "periodic":
        if not grid.periodic[0]:
            raise ContractViolation("periodic mean requires a periodic grid")
        return float(np.mean(v))
    if mode == "L1":
        tol = edge_tol * max(1.0, float(np.max(np.abs(v))))
        edge = max(abs(float(v[0])), abs(float(v[-1])))
        if edge > tol:
            raise DomainTooSmallError(
                f"|v| = {edge:.3e} at the domain edge exceeds {tol:.3e}; "
                "enlarge the truncation box"
            )
        if not np.isfinite(np.sum(np.abs(v)) * grid.spacing[0]):
            raise NonFiniteInputError("L1 norm of the field is not finite")
        return 0.0
    raise ContractViolation(f"unknown mean mode {mode!r}")


def _cumtrapz_from(values: np.ndarray, axis: int, start: int, h: float,
                   seed: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid antiderivative along one axis, anchored so the
    slice at ``start`` equals ``seed``. Integrates both directions."""
    arr = np.moveaxis(values, axis, 0)
    n = arr.shape[0]
    out = np.empty_like(arr)
    out[start] = seed
    # increments between consecutive nodes
    inc = 0.5 * h * (arr[1:] + arr[:-1])
    if start < n - 1:
        out[start + 1:] = out[start] + np.cumsum(inc[start:], axis=0)
    if start > 0:
        back = np.cumsum(inc[:start][::-1], axis=0)[::-1]
        out[:start] = out[start] - back
    return np.moveaxis(out, 0, axis)


def line_integrate(fieldsample: GradientFieldSample, anchor_value: float,
                   curl_tol: float | None = None) -> GraphSample:
    """Recover graph heights from a gradient field by composite quadrature.

    The path is fixed: from the anchor node (nearest the origin) first along
    axis 0, then axis 1, then axis 2. Path independence is not averaged over;
    it is enforced up front through the discrete curl residual, which mirrors
    the analytic statement that the evolved field stays a gradient.
    """
    grid = fieldsample.grid
    if grid.dim >= 2:
        tol = default_curl_tol(fieldsample) if curl_tol is None else curl_tol
        worst, where = max_curl_residual(fieldsample)
        if worst > tol:
            raise NonIntegrableFieldError(worst, where, tol)

    anchor = grid.anchor_index()
    heights = np.array(0.0)
    # axis 0 line through the anchor, then sweep each further axis in turn
    for axis in range(grid.dim):
        comp = fieldsample.values[..., axis]
        # restrict trailing axes to the anchor position: leading axes are
        # already integrated, trailing ones come later
        index = tuple(
            slice(None) if a <= axis else anchor[a] for a in range(grid.dim)
        )
        sub = comp[index]
        seed = heights if axis > 0 else np.array(float(anchor_value))
        heights = _cumtrapz_from(sub, axis, anchor[axis], grid.spacing[axis], seed)
    return GraphSample(
        grid=grid,
        t=fieldsample.t,
        heights=heights,
        anchor_index=anchor,
        anchor_value=float(anchor_value),
    )
