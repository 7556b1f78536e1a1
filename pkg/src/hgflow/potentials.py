"""Initial potentials: evaluation, gradient and Hessian access.

A :class:`PotentialFn` wraps callables for the height function, its gradient
(the initial slope field) and optionally its Hessian. Missing rules fall back
to central differences; the finite-difference Hessian is symmetrized by
construction. All rules accept batched points of shape ``(..., dim)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractViolation, NonFiniteInputError

# steps tuned for second derivatives (eps**0.25) and first (eps**(1/3))
_H_GRAD = float(np.finfo(float).eps) ** (1.0 / 3.0)
_H_HESS = float(np.finfo(float).eps) ** 0.25


def _as_points(x, dim: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        if dim != 1:
            raise ContractViolation("scalar point passed to a multi-D potential")
        pts = pts.reshape(1)
    if pts.shape[-1] != dim:
        raise ContractViolation(
            f"point has trailing dimension {pts.shape[-1]}, expected {dim}"
        )
    return pts


@dataclass(frozen=True)
class PotentialFn:
    """Analytic or sampled potential with gradient/Hessian access."""

    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    hess: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "custom"

    def __call__(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        out = np.asarray(self.value(pts), dtype=float)
        if not np.all(np.isfinite(out)):
            raise NonFiniteInputError(f"potential {self.name} evaluated non-finite")
        return out

    def gradient(self, x) -> np.ndarray:
        pts = _as_points(x, self.dim)
        if self.grad is not None:
            g = np.asarray(self.grad(pts), dtype=float)
        else:
            g = fd_gradient_at(self, pts)
        if not np.all(np.isfinite(g)):
            raise NonFiniteInputError(f"gradient of {self.name} non-finite")
        return g

    def hessian(self, x) -> np.ndarray:
        """Analytic Hessian when available, else the symmetrized
        central-difference Hessian."""
        pts = _as_points(x, self.dim)
        if self.hess is not None:
            h = np.asarray(self.hess(pts), dtype=float)
            return 0.5 * (h + np.swapaxes(h, -1, -2))
        return fd_hessian(self, pts)

    def scaled(self, c: float) -> "PotentialFn":
        """The potential c * phi (scales the induced field by c)."""
        c = float(c)
        grad = None if self.grad is None else (lambda x: c * self.grad(x))
        hess = None if self.hess is None else (lambda x: c * self.hess(x))
        return PotentialFn(
            dim=self.dim,
            value=lambda x: c * self.value(x),
            grad=grad,
            hess=hess,
            name=f"{self.name}*{c:g}",
        )


def fd_gradient_at(phi: PotentialFn, x) -> np.ndarray:
    """Second-order central-difference gradient of the potential."""
    pts = _as_points(x, phi.dim)
    out = np.empty(pts.shape)
    for i in range(phi.dim):
        h = _H_GRAD * (1.0 + np.abs(pts[..., i]))
        xp = pts.copy()
        xm = pts.copy()
        xp[..., i] += h
        xm[..., i] -= h
        out[..., i] = (phi.value(xp) - phi.value(xm)) / (xp[..., i] - xm[..., i])
    return out


def fd_hessian(phi: PotentialFn, x) -> np.ndarray:
    """Central-difference Hessian, symmetrized so H == H.T bitwise."""
    pts = _as_points(x, phi.dim)
    n = phi.dim
    out = np.empty(pts.shape[:-1] + (n, n))
    f0 = phi.value(pts)
    steps = [_H_HESS * (1.0 + np.abs(pts[..., i])) for i in range(n)]
    for i in range(n):
        xp = pts.copy()
        xm = pts.copy()
        xp[..., i] += steps[i]
        xm[..., i] -= steps[i]
        hi = 0.5 * (xp[..., i] - xm[..., i])
        out[..., i, i] = (phi.value(xp) - 2.0 * f0 + phi.value(xm)) / hi**2
        for j in range(i + 1, n):
            hj = steps[j]
            xpp = pts.copy()
            xpm = pts.copy()
            xmp = pts.copy()
            xmm = pts.copy()
            for arr, si, sj in ((xpp, 1, 1), (xpm, 1, -1), (xmp, -1, 1), (xmm, -1, -1)):
                arr[..., i] += si * steps[i]
                arr[..., j] += sj * hj
            mixed = (
                phi.value(xpp) - phi.value(xpm) - phi.value(xmp) + phi.value(xmm)
            ) / (4.0 * steps[i] * hj)
            out[..., i, j] = mixed
            out[..., j, i] = mixed
    return 0.5 * (out + np.swapaxes(out, -1, -2))


# ---------------------------------------------------------------------------
# builtin potentials


def paraboloid(dim: int) -> PotentialFn:
    """phi = |x|^2 / 2; the induced field is x itself."""
    return PotentialFn(
        dim=dim,
        value=lambda x: 0.5 * np.sum(x * x, axis=-1),
        grad=lambda x: x.copy(),
        hess=lambda x: np.broadcast_to(
            np.eye(dim), x.shape[:-1] + (dim, dim)
        ).copy(),
        name="paraboloid",
    )


def neg_cos(dim: int) -> PotentialFn:
    """phi = -sum cos(x_i); slope sin(x_i), periodic, loses convexity."""

    def hess(x):
        out = np.zeros(x.shape[:-1] + (dim, dim))
        d = np.cos(x)
        for i in range(dim):
            out[..., i, i] = d[..., i]
        return out

    return PotentialFn(
        dim=dim,
        value=lambda x: -np.sum(np.cos(x), axis=-1),
        grad=lambda x: np.sin(x),
        hess=hess,
        name="neg_cos",
    )


def log_cosh(dim: int) -> PotentialFn:
    """phi = sum log cosh(x_i); strictly convex with bounded slope."""

    def value(x):
        # overflow-safe log cosh
        ax = np.abs(x)
        return np.sum(ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0), axis=-1)

    def hess(x):
        out = np.zeros(x.shape[:-1] + (dim, dim))
        d = 1.0 / np.cosh(x) ** 2
        for i in range(dim):
            out[..., i, i] = d[..., i]
        return out

    return PotentialFn(
        dim=dim, value=value, grad=lambda x: np.tanh(x), hess=hess, name="log_cosh"
    )


def bump(amplitude: float = 1.0) -> PotentialFn:
    """Compactly supported 1-D potential a*(1-x^2)^4 on |x|<1.

    Its slope -8ax(1-x^2)^3 is a mean-zero compact bump pair, the stock
    initial datum for the L1 decay scenarios. C^3 across the support edge.
    """
    a = float(amplitude)

    def value(x):
        s = x[..., 0]
        inside = np.abs(s) < 1.0
        return np.where(inside, a * (1.0 - s * s) ** 4, 0.0)

    def grad(x):
        s = x[..., 0]
        inside = np.abs(s) < 1.0
        g = np.where(inside, -8.0 * a * s * (1.0 - s * s) ** 3, 0.0)
        return g[..., None]

    def hess(x):
        s = x[..., 0]
        inside = np.abs(s) < 1.0
        q = 1.0 - s * s
        h = np.where(inside, -8.0 * a * q * q * (q - 6.0 * s * s), 0.0)
        return h[..., None, None]

    return PotentialFn(dim=1, value=value, grad=grad, hess=hess, name="bump")


def bump_slope_amplitude(amplitude: float = 1.0) -> float:
    """Peak |slope| of the bump potential (attained at x = 1/sqrt(7))."""
    s = 1.0 / np.sqrt(7.0)
    return float(8.0 * amplitude * s * (1.0 - s * s) ** 3)


def polynomial(terms, dim: int) -> PotentialFn:
    """Multivariate polynomial potential from (coefficient, exponents) terms."""
    parsed = []
    for coef, exps in terms:
        exps = tuple(int(e) for e in exps)
        if len(exps) != dim:
            raise ContractViolation(
                f"exponent tuple {exps} does not match dim {dim}"
            )
        if any(e < 0 for e in exps):
            raise ContractViolation("polynomial exponents must be non-negative")
        parsed.append((float(coef), exps))

    def _mono(x, exps):
        out = np.ones(x.shape[:-1])
        for i, e in enumerate(exps):
            if e:
                out = out * x[..., i] ** e
        return out

    def value(x):
        out = np.zeros(x.shape[:-1])
        for coef, exps in parsed:
            out += coef * _mono(x, exps)
        return out

    def grad(x):
        out = np.zeros(x.shape)
        for coef, exps in parsed:
            for i, e in enumerate(exps):
                if e:
                    dexp = exps[:i] + (e - 1,) + exps[i + 1:]
                    out[..., i] += coef * e * _mono(x, dexp)
        return out

    def hess(x):
        out = np.zeros(x.shape[:-1] + (dim, dim))
        for coef, exps in parsed:
            for i, ei in enumerate(exps):
                if not ei:
                    continue
                for j, ej in enumerate(exps):
                    if i == j:
                        if ei >= 2:
                            dexp = list(exps)
                            dexp[i] = ei - 2
                            out[..., i, i] += coef * ei * (ei - 1) * _mono(
                                x, tuple(dexp)
                            )
                    elif ej:
                        dexp = list(exps)
                        dexp[i] = ei - 1
                        dexp[j] = ej - 1
                        out[..., i, j] += coef * ei * ej * _mono(x, tuple(dexp))
        return out

    return PotentialFn(dim=dim, value=value, grad=grad, hess=hess, name="poly")


BUILTIN_NAMES = ("paraboloid", "neg_cos", "log_cosh", "bump", "poly")


def make_builtin(name: str, dim: int, scale: float = 1.0,
                 poly_terms=None) -> PotentialFn:
    """Instantiate a builtin potential by name, with optional scaling."""
    if name == "paraboloid":
        phi = paraboloid(dim)
    elif name == "neg_cos":
        phi = neg_cos(dim)
    elif name == "log_cosh":
        phi = log_cosh(dim)
    elif name == "bump":
        if dim != 1:
            raise ContractViolation("bump potential is 1-D only")
        return bump(amplitude=scale)
    elif name == "poly":
        if not poly_terms:
            raise ContractViolation("poly potential needs coefficient terms")
        phi = polynomial(poly_terms, dim)
    else:
        raise ContractViolation(
            f"unknown builtin {name!r}; choose from {BUILTIN_NAMES}"
        )
    return phi if scale == 1.0 else phi.scaled(scale)
