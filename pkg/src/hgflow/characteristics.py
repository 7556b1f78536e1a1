"""Exact smooth solution for convex data via the characteristic map.

For gradient data with potential phi the characteristics are straight lines
x = alpha + t * grad(phi)(alpha); the forward map has Jacobian
I + t * Hess(phi), whose determinant never drops below one for convex phi,
so the map inverts globally and v(t, x) = grad(phi)(alpha(t, x)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convexity import ConvexityReport, Verdict, existence_verdict
from .errors import (
    ContractViolation,
    NoConvergenceError,
    NonFiniteInputError,
    NotCertifiedConvexError,
    SingularMapError,
)
from .grids import GradientFieldSample, GridN
from .potentials import PotentialFn

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
_DET_FLOOR = 1e-14


@dataclass(frozen=True)
class CharMap:
    """Characteristic map alpha -> alpha + t * grad(phi)(alpha) at fixed t."""

    phi: PotentialFn
    t: float
    convexity: ConvexityReport | None = None

    def __post_init__(self):
        if not np.isfinite(self.t) or self.t < 0.0:
            raise ContractViolation("time must be finite and non-negative")

    @classmethod
    def certified(cls, phi: PotentialFn, t: float, box: GridN,
                  samples: int = 65) -> "CharMap":
        """Build a map carrying a convexity certificate for ``box``."""
        report = existence_verdict(phi, box, samples=samples)
        return cls(phi=phi, t=t, convexity=report)

    def at_time(self, t: float) -> "CharMap":
        return CharMap(phi=self.phi, t=t, convexity=self.convexity)

    def _require_certificate(self):
        if self.convexity is None:
            raise NotCertifiedConvexError(
                "inversion requires a convexity certificate; "
                "build the map with CharMap.certified"
            )
        if self.convexity.verdict is Verdict.BLOW_UP_EXPECTED:
            raise NotCertifiedConvexError(
                "initial data fails the eigenvalue criterion "
                f"(min eigenvalue {self.convexity.min_eigenvalue:.3e}); "
                "the smooth inverse is not defined, use the entropy solver"
            )


def forward_map(cmap: CharMap, alpha) -> np.ndarray:
    """Image of alpha under the time-t characteristic map."""
    a = np.asarray(alpha, dtype=float)
    out = a + cmap.t * cmap.phi.gradient(a)
    if not np.all(np.isfinite(out)):
        raise NonFiniteInputError("characteristic image is not finite")
    return out


def jacobian(cmap: CharMap, alpha):
    """Jacobian I + t * Hess(phi) at alpha, with its determinant."""
    a = np.asarray(alpha, dtype=float)
    n = cmap.phi.dim
    jac = cmap.t * cmap.phi.hessian(a)
    idx = np.arange(n)
    jac[..., idx, idx] += 1.0
    return jac, np.linalg.det(jac)


def invert(cmap: CharMap, x, initial_guess=None) -> np.ndarray:
    """Solve alpha + t * grad(phi)(alpha) = x by Newton iteration.

    Requires the map to be certified convex; contraction is then strong
    because det J >= 1 everywhere. The default starting point rescales x by
    the mean sampled eigenvalue, falling back to x itself.
    """
    cmap._require_certificate()
    pts = np.asarray(x, dtype=float)
    if cmap.t == 0.0:
        return pts.copy()
    if initial_guess is None:
        lam = cmap.convexity.mean_eigenvalue
        denom = 1.0 + cmap.t * lam
        alpha = pts / denom if denom > 0.1 else pts.copy()
    else:
        alpha = np.array(initial_guess, dtype=float)
        if alpha.shape != pts.shape:
            raise ContractViolation("initial guess shape mismatch")
        alpha = alpha.copy()

    g = alpha + cmap.t * cmap.phi.gradient(alpha) - pts
    for _ in range(NEWTON_MAX_ITER):
        resid = float(np.max(np.abs(g)))
        if resid <= NEWTON_TOL:
            return alpha
        jac, det = jacobian(cmap, alpha)
        if np.any(np.abs(det) < _DET_FLOOR):
            raise SingularMapError(
                f"characteristic Jacobian singular (|det| < {_DET_FLOOR:g})"
            )
        alpha = alpha - np.linalg.solve(jac, g[..., None])[..., 0]
        g = alpha + cmap.t * cmap.phi.gradient(alpha) - pts
    raise NoConvergenceError(float(np.max(np.abs(g))), NEWTON_MAX_ITER)


def evaluate_solution(cmap: CharMap, x) -> np.ndarray:
    """v(t, x): the initial slope carried along the characteristic through x."""
    if cmap.t == 0.0:
        return cmap.phi.gradient(np.asarray(x, dtype=float))
    return cmap.phi.gradient(invert(cmap, x))


def invert_grid(cmap: CharMap, grid: GridN) -> np.ndarray:
    """Characteristic feet for every grid node, shape node_counts + (dim,).

    Sweeps along axis 0 warm-starting each slab of nodes from the previous
    one; slabs are solved as one Newton batch, so the result is independent
    of any internal parallelism.
    """
    cmap._require_certificate()
    mesh = grid.node_mesh()
    if cmap.t == 0.0:
        return mesh
    alphas = np.empty_like(mesh)
    guess = None
    for i in range(mesh.shape[0]):
        alphas[i] = invert(cmap, mesh[i], initial_guess=guess)
        guess = alphas[i]
    return alphas


def sample_field(cmap: CharMap, grid: GridN) -> GradientFieldSample:
    """Evaluate the smooth solution on a grid as a GradientFieldSample."""
    alphas = invert_grid(cmap, grid)
    return GradientFieldSample(
        grid=grid, t=cmap.t, values=cmap.phi.gradient(alphas)
    )


@dataclass(frozen=True)
class CharacteristicTube:
    """Forward image of a fixed compact box of characteristic feet.

    Decay estimates for unbounded convex data hold on these moving images,
    not on all of space, so sup norms are measured here.
    """

    base_grid: GridN
    t: float
    image_points: np.ndarray

    @classmethod
    def build(cls, cmap: CharMap, lo, hi, cells) -> "CharacteristicTube":
        base = GridN.make(lo, hi, cells, periodic=False)
        images = forward_map(cmap, base.node_mesh())
        return cls(base_grid=base, t=cmap.t, image_points=images)

    def bounding_box(self, pad: float = 0.0):
        flat = self.image_points.reshape(-1, self.base_grid.dim)
        return flat.min(axis=0) - pad, flat.max(axis=0) + pad

    def contains_alpha(self, alphas: np.ndarray, slack: float = 1e-9) -> np.ndarray:
        """Mask of points whose characteristic foot lies in the base box."""
        lo = np.array(self.base_grid.lo) - slack
        hi = np.array(self.base_grid.hi) + slack
        return np.all((alphas >= lo) & (alphas <= hi), axis=-1)
