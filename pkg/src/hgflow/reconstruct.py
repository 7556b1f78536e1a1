"""Rebuild the evolving graph from its slope field and measure flattening.

The flow determines heights only up to a time-dependent constant. The gauge
adopted here pins that constant through dU/dt = -|grad U|^2 / 2 at the anchor
node, the unique choice that reproduces the closed-form paraboloid evolution
with zero offset, so reconstructed snapshots are directly comparable across
time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .characteristics import (
    CharacteristicTube,
    CharMap,
    evaluate_solution,
    invert_grid,
    jacobian,
)
from .convexity import Verdict, existence_verdict
from .entropy1d import (
    Boundary,
    EntropyState1D,
    fit_loglog_slope,
    run_with_checkpoints,
    step,
)
from .errors import ContractViolation
from .grids import (
    GradientFieldSample,
    GraphSample,
    GridN,
    _diff_axis,
    line_integrate,
    max_curl_residual,
)
from .potentials import PotentialFn

DT_GAUGE = 0.01


def gauge_anchor_series(u0: float, velocity_at, times, dt_gauge: float = DT_GAUGE):
    """Integrate dU/dt = -|v(t, x_anchor)|^2 / 2 from t=0 through ``times``.

    Classical RK4 with step <= dt_gauge; ``velocity_at(t)`` returns the field
    vector at the anchor point. Returns the anchor value at each time.
    """
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or sorted(times) != times:
        raise ContractViolation("gauge times must be sorted and non-negative")

    def rhs(tau):
        v = np.asarray(velocity_at(tau), dtype=float)
        return -0.5 * float(np.dot(v.ravel(), v.ravel()))

    out = []
    u = float(u0)
    t = 0.0
    for target in times:
        span = target - t
        if span > 0:
            nsteps = max(1, math.ceil(span / dt_gauge))
            dt = span / nsteps
            for _ in range(nsteps):
                k1 = rhs(t)
                k23 = rhs(t + 0.5 * dt)
                k4 = rhs(t + dt)
                u += dt / 6.0 * (k1 + 4.0 * k23 + k4)
                t += dt
        out.append(u)
    return out


def evolve_potential(phi0: PotentialFn, field_at, t: float, *,
                     anchor_velocity=None, dt_gauge: float = DT_GAUGE,
                     curl_tol: float | None = None) -> GraphSample:
    """Graph snapshot at time t from the flow field rule ``field_at``.

    Heights come from line integration of the field; the anchor height comes
    from the gauge ODE started at phi0(x_anchor). By default the anchor
    velocity is read off the sampled field, which is exact but re-samples the
    whole grid at every gauge stage; pass ``anchor_velocity`` for a pointwise
    rule when one is available.
    """
    fieldsample = field_at(t)
    grid = fieldsample.grid
    anchor_pos = grid.node_position(grid.anchor_index())
    if anchor_velocity is None:
        idx = grid.anchor_index()
        anchor_velocity = lambda tau: field_at(tau).values[idx]  # noqa: E731
    u0 = float(phi0(anchor_pos[None, :])[0])
    (u_t,) = gauge_anchor_series(u0, anchor_velocity, [t], dt_gauge=dt_gauge)
    return line_integrate(fieldsample, u_t, curl_tol=curl_tol)


@dataclass
class PotentialEvolution:
    """Snapshots of the evolving graph at requested times, sharing one
    sequentially integrated gauge series."""

    phi0: PotentialFn
    times: list
    anchor_values: list
    snapshots: list

    @classmethod
    def run(cls, phi0: PotentialFn, field_at, times, *, anchor_velocity=None,
            dt_gauge: float = DT_GAUGE,
            curl_tol: float | None = None) -> "PotentialEvolution":
        times = sorted(float(t) for t in times)
        fields = [field_at(t) for t in times]
        anchors = {f.grid.anchor_index() for f in fields}
        grids = {id(f.grid) for f in fields}
        if len(grids) > 1 and len({
            tuple(f.grid.node_position(f.grid.anchor_index())) for f in fields
        }) > 1:
            raise ContractViolation(
                "shared gauge series needs one anchor point across snapshots"
            )
        grid = fields[0].grid
        anchor_idx = next(iter(anchors))
        anchor_pos = grid.node_position(anchor_idx)
        if anchor_velocity is None:
            anchor_velocity = lambda tau: field_at(tau).values[anchor_idx]  # noqa: E731
        u0 = float(phi0(anchor_pos[None, :])[0])
        anchor_values = gauge_anchor_series(
            u0, anchor_velocity, times, dt_gauge=dt_gauge
        )
        snaps = [
            line_integrate(f, u, curl_tol=curl_tol)
            for f, u in zip(fields, anchor_values)
        ]
        return cls(
            phi0=phi0, times=times, anchor_values=anchor_values, snapshots=snaps
        )


def reconstruct_curve(state: EntropyState1D, anchor_value: float) -> GraphSample:
    """Continuous primitive of the entropy solution: the evolved curve.

    Midpoint quadrature of cell averages is the exact integral of the
    piecewise-constant solution, so F is continuous and piecewise C^1 with
    corners exactly where the solution jumps.
    """
    grid = state.grid
    v = state.cell_avgs
    h = grid.spacing[0]
    anchor = grid.anchor_index()[0]
    n_nodes = grid.node_counts[0]
    heights = np.empty(n_nodes)
    heights[anchor] = anchor_value
    inc = h * v  # exact integral of the solution across each cell
    if anchor < n_nodes - 1:
        heights[anchor + 1:] = anchor_value + np.cumsum(inc[anchor:])[
            : n_nodes - 1 - anchor
        ]
    if anchor > 0:
        back = np.cumsum(inc[:anchor][::-1])[::-1]
        heights[:anchor] = anchor_value - back
    return GraphSample(
        grid=grid,
        t=state.t,
        heights=heights,
        anchor_index=(anchor,),
        anchor_value=float(anchor_value),
    )


# ---------------------------------------------------------------------------
# finite-difference derivative tensors of sampled heights


def height_derivative_tensors(sample: GraphSample):
    """Second and third difference tensors of the heights.

    Returns (d2, d3) with shapes node_counts + (dim, dim) and
    node_counts + (dim, dim, dim). Built from repeated first-difference
    stencils; only nodes at least three stencils from a boundary are
    trustworthy, callers mask accordingly.
    """
    grid = sample.grid
    n = grid.dim
    sp = grid.spacing
    per = grid.periodic
    d1 = [_diff_axis(sample.heights, a, sp[a], per[a]) for a in range(n)]
    d2 = np.empty(grid.node_counts + (n, n))
    for a in range(n):
        for b in range(a, n):
            d2ab = _diff_axis(d1[a], b, sp[b], per[b])
            d2[..., a, b] = d2ab
            d2[..., b, a] = d2ab
    d3 = np.empty(grid.node_counts + (n, n, n))
    for a in range(n):
        for b in range(a, n):
            for c in range(b, n):
                d3abc = _diff_axis(d2[..., a, b], c, sp[c], per[c])
                for perm in {(a, b, c), (a, c, b), (b, a, c),
                             (b, c, a), (c, a, b), (c, b, a)}:
                    d3[(...,) + perm] = d3abc
    return d2, d3


def interior_mask(grid: GridN, margin: int) -> np.ndarray:
    """True where a node is at least ``margin`` nodes away from every
    non-periodic boundary."""
    mask = np.ones(grid.node_counts, dtype=bool)
    for a in range(grid.dim):
        if grid.periodic[a]:
            continue
        sl = [slice(None)] * grid.dim
        sl[a] = slice(0, margin)
        mask[tuple(sl)] = False
        sl[a] = slice(grid.node_counts[a] - margin, None)
        mask[tuple(sl)] = False
    return mask


# ---------------------------------------------------------------------------
# flattening / straightening reports


@dataclass
class FlatteningReport:
    """Sup norms of height derivatives over the moving tube, their fitted
    algebraic rates, and the straight-line diagnostics for plane curves."""

    times: list
    sup_d2: list | None = None
    sup_d3: list | None = None
    line_deviation: list | None = None
    fitted_slopes: dict = field(default_factory=dict)
    straight_line_slope: float | None = None
    min_det_j: list | None = None
    max_curl: list | None = None

    def to_json_dict(self) -> dict:
        return {
            "times": list(self.times),
            "sup_d2": self.sup_d2,
            "sup_d3": self.sup_d3,
            "line_deviation": self.line_deviation,
            "fitted_slopes": self.fitted_slopes,
            "straight_line_slope": self.straight_line_slope,
            "min_det_j": self.min_det_j,
            "max_curl": self.max_curl,
        }


def _fit_guarded(times, values):
    """Slope only when five or more checkpoints span a time decade."""
    t = np.asarray(times, dtype=float)
    if t.size < 5 or (1.0 + t.max()) / (1.0 + t.min()) < 10.0:
        return None
    return fit_loglog_slope(t, np.asarray(values))


def flattening_report(phi: PotentialFn, tube_lo, tube_hi, checkpoints, *,
                      tube_cells: int = 24, grid_cells: int = 96,
                      convexity_samples: int = 33, pad_cells: int = 4,
                      dt_gauge: float = DT_GAUGE,
                      curl_tol: float | None = None) -> FlatteningReport:
    """Decay diagnostics for a convex flow over the moving tube.

    For each checkpoint the fixed base box of characteristic feet is pushed
    forward, a measurement grid is laid over the image's bounding box, the
    graph is reconstructed there, and sup norms of its second and third
    differences are taken over nodes whose feet lie inside the base box.
    """
    checkpoints = sorted(float(t) for t in checkpoints)
    if len(checkpoints) < 1 or checkpoints[0] <= 0:
        raise ContractViolation("need positive checkpoint times")
    dim = phi.dim
    box = GridN.make(tube_lo, tube_hi, max(8, tube_cells))
    report = existence_verdict(phi, box, samples=convexity_samples)
    if report.verdict is Verdict.BLOW_UP_EXPECTED:
        raise ContractViolation(
            "flattening diagnostics need convex data; existence verdict is "
            f"{report.verdict.value}"
        )

    sup_d2, sup_d3, min_det, max_curl = [], [], [], []
    for t in checkpoints:
        cmap = CharMap(phi=phi, t=t, convexity=report)
        tube = CharacteristicTube.build(cmap, tube_lo, tube_hi, tube_cells)
        lo, hi = tube.bounding_box()
        pad = pad_cells * (hi - lo) / grid_cells
        grid = GridN.make(lo - pad, hi + pad, grid_cells)
        alphas = invert_grid(cmap, grid)
        fieldsample = GradientFieldSample(
            grid=grid, t=t, values=phi.gradient(alphas)
        )
        _, det = jacobian(cmap, alphas)
        min_det.append(float(np.min(det)))
        worst, _ = max_curl_residual(fieldsample)
        max_curl.append(worst)

        anchor_pos = grid.node_position(grid.anchor_index())
        snapshot = evolve_potential(
            phi,
            lambda _t, fs=fieldsample: fs,
            t,
            anchor_velocity=lambda tau: evaluate_solution(
                cmap.at_time(tau), anchor_pos
            ),
            dt_gauge=dt_gauge,
            curl_tol=curl_tol,
        )
        d2, d3 = height_derivative_tensors(snapshot)
        mask = tube.contains_alpha(alphas) & interior_mask(grid, 3)
        if not np.any(mask):
            raise ContractViolation("tube mask is empty; enlarge the grid")
        sup_d2.append(float(np.max(np.abs(d2[mask]))))
        sup_d3.append(float(np.max(np.abs(d3[mask]))))

    slopes = {
        "sup_d2": _fit_guarded(checkpoints, sup_d2),
        "sup_d3": _fit_guarded(checkpoints, sup_d3),
    }
    return FlatteningReport(
        times=checkpoints,
        sup_d2=sup_d2,
        sup_d3=sup_d3,
        fitted_slopes=slopes,
        min_det_j=min_det,
        max_curl=max_curl,
    )


def straightening_report(initial: EntropyState1D, checkpoints,
                         cfl: float = 0.9) -> FlatteningReport:
    """Theorem-style straightening diagnostics for an evolving plane curve.

    Measures sup_x |F(t,x) - F(t,anchor) - M (x - x_anchor)| at each
    checkpoint, the discrete distance from the curve to the limiting straight
    line of slope M through the anchor; the constant offset cancels, so no
    gauge enters. The slope is fitted over the second half of checkpoints.
    """
    checkpoints = sorted(float(t) for t in checkpoints)
    if not checkpoints:
        raise ContractViolation("need at least one checkpoint")
    if initial.boundary is Boundary.PERIODIC:
        m_val = initial.mean
    else:
        m_val = 0.0
    states, _, _ = run_with_checkpoints(initial, checkpoints, cfl=cfl,
                                        detect_every=0)
    grid = initial.grid
    anchor = grid.anchor_index()[0]
    xs = grid.axis_nodes(0)
    line = m_val * (xs - xs[anchor])
    deviations = []
    for t in checkpoints:
        curve = reconstruct_curve(states[t], anchor_value=0.0)
        dev = curve.heights - curve.heights[anchor] - line
        deviations.append(float(np.max(np.abs(dev))))
    half = len(checkpoints) // 2
    slope = fit_loglog_slope(checkpoints[half:], deviations[half:])
    return FlatteningReport(
        times=checkpoints,
        line_deviation=deviations,
        fitted_slopes={"line_deviation": slope},
        straight_line_slope=m_val,
    )


def anchor_gauge_trace(initial: EntropyState1D, checkpoints, cfl: float = 0.9):
    """Anchor heights for curve snapshots from the per-step gauge increment.

    Integrates dF(t, x_anchor)/dt = -v(t, x_anchor)^2 / 2 with a trapezoid
    increment per solver step; v at the anchor is read from the cell nearest
    the anchor node. Returns {checkpoint: anchor_value}. The O(h) offset from
    cell-center sampling only shifts snapshots vertically.
    """
    checkpoints = sorted(float(t) for t in checkpoints)
    grid = initial.grid
    anchor_x = grid.axis_nodes(0)[grid.anchor_index()[0]]
    cell = int(np.clip(round((anchor_x - grid.lo[0]) / grid.spacing[0] - 0.5),
                       0, grid.cells[0] - 1))
    out = {}
    u = 0.0
    state = initial
    v_prev = float(state.cell_avgs[cell])
    for t_next in checkpoints:
        while state.t < t_next - 1e-14:
            t_before = state.t
            state = step(state, cfl, dt_max=t_next - state.t)
            v_now = float(state.cell_avgs[cell])
            u += -(state.t - t_before) * 0.25 * (v_prev**2 + v_now**2)
            v_prev = v_now
        out[t_next] = u
    return out
