"""Column-sparsity penalties and their closed-form proximal mappings.

Six scalar penalties are supported, selected by a :class:`ThetaSpec`.  Every
penalty vanishes at zero, is positive on the open positive axis, equals +inf
on the negative axis, and is differentiable for t > 0:

==========  =============================================================
theta1      0/1 indicator of t > 0 (counts nonzero columns)
theta2      t**2
theta3      t
theta4      sqrt(t)         (half thresholding)
theta5      t**(2/3)        (2/3 thresholding)
theta6      capped linear ramp rho*t, quadratically blended into the
            constant 1 between 2/(rho*(a+1)) and 2*a/(rho*(a+1)), a > 1
==========  =============================================================

``prox_theta_scalar`` evaluates one element of
``argmin_x (1/(2*nu)) * (x - s)**2 + theta(x)`` for s >= 0.  The mapping is
multi-valued at thresholds; the smallest-magnitude element is always
returned, which keeps the map deterministic and monotone in s and biases
column vectors toward exact zero.  ``prox_column`` lifts the scalar map to
``argmin_x 0.5*||gamma*x - u||**2 + lam*theta(||x||)``: the minimizer is a
nonnegative multiple of u, with magnitude given by the scalar prox at
``nu = lam/gamma**2``, ``s = ||u||/gamma``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

_TWO_PI_3 = 2.0 * math.pi / 3.0


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


@dataclass(frozen=True)
class ThetaSpec:
    """Penalty selector; ``a`` and ``rho`` are used by theta6 only."""

    kind: int
    a: float = 2.0
    rho: float = 1.0

    def __post_init__(self):
        if self.kind not in (1, 2, 3, 4, 5, 6):
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.kind == 6:
            if not self.a > 1.0:
                raise ValueError("theta6 requires a > 1")
            if not self.rho > 0.0:
                raise ValueError("theta6 requires rho > 0")

    @property
    def name(self) -> str:
        if self.kind == 6:
            return f"theta6(a={self.a:g},rho={self.rho:g})"
        return f"theta{self.kind}"

    def breakpoints(self) -> tuple[float, float]:
        """theta6 ramp/blend boundaries (t1, t2); raises for other kinds."""
        if self.kind != 6:
            raise ValueError("breakpoints are defined for theta6 only")
        t1 = 2.0 / (self.rho * (self.a + 1.0))
        return t1, self.a * t1


_THETA_RE = re.compile(r"^theta([1-6])\s*(?:\(\s*(.*?)\s*\))?$")


def parse_theta(text: str) -> ThetaSpec:
    """Parse a config string such as ``"theta3"`` or ``"theta6(a=3,rho=1.5)"``."""
    m = _THETA_RE.match(text.strip().lower())
    if m is None:
        raise ValueError(f"cannot parse penalty spec {text!r}")
    kind = int(m.group(1))
    kwargs = {}
    if m.group(2):
        for item in m.group(2).split(","):
            key, _, val = item.partition("=")
            key = key.strip()
            if key not in ("a", "rho"):
                raise ValueError(f"unknown theta parameter {key!r} in {text!r}")
            kwargs[key] = float(val)
    if kwargs and kind != 6:
        raise ValueError("parameters a/rho apply to theta6 only")
    return ThetaSpec(kind, **kwargs)


def theta_eval(spec: ThetaSpec, t):
    """Penalty value; accepts scalars or arrays, returns +inf for t < 0."""
    arr = np.asarray(t, dtype=float)
    k = spec.kind
    if k == 1:
        pos = np.where(arr > 0, 1.0, 0.0)
    elif k == 2:
        pos = arr * arr
    elif k == 3:
        pos = arr
    elif k == 4:
        pos = np.sqrt(np.abs(arr))
    elif k == 5:
        pos = np.cbrt(np.abs(arr)) ** 2
    else:
        t1, t2 = spec.breakpoints()
        a, rho = spec.a, spec.rho
        blend = rho * arr - (rho * (a + 1.0) * arr - 2.0) ** 2 / (4.0 * (a * a - 1.0))
        pos = np.select([arr > t2, arr > t1], [1.0, blend], default=rho * arr)
    out = np.where(arr < 0, np.inf, pos)
    return float(out) if np.isscalar(t) or out.ndim == 0 else out


def theta_derivative(spec: ThetaSpec, t):
    """Derivative on the positive axis; rejects t <= 0."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("derivative is defined for t > 0 only")
    k = spec.kind
    if k == 1:
        der = np.zeros_like(arr)
    elif k == 2:
        der = 2.0 * arr
    elif k == 3:
        der = np.ones_like(arr)
    elif k == 4:
        der = 0.5 / np.sqrt(arr)
    elif k == 5:
        der = (2.0 / 3.0) / np.cbrt(arr)
    else:
        t1, t2 = spec.breakpoints()
        a, rho = spec.a, spec.rho
        blend = rho - rho * (a + 1.0) * (rho * (a + 1.0) * arr - 2.0) / (2.0 * (a * a - 1.0))
        der = np.select([arr > t2, arr > t1], [0.0, blend], default=np.full_like(arr, rho))
    return float(der) if np.isscalar(t) or der.ndim == 0 else der


def vartheta_eval(spec: ThetaSpec, W: np.ndarray) -> float:
    """Sum of the penalty over Euclidean column norms of a 2-d array."""
    W = np.asarray(W, dtype=float)
    norms = np.linalg.norm(W, axis=0)
    return float(np.sum(theta_eval(spec, norms)))


def _largest_root_depressed_cubic(c1: float, c0: float) -> float:
    """Largest real root of z**3 - c1*z - c0 = 0 with c1 > 0, c0 > 0.

    By Descartes' rule this cubic has exactly one positive root, which is
    also its largest real root.
    """
    p = -c1
    q = -c0
    disc = 0.25 * q * q + p * p * p / 27.0
    if disc > 0:
        sq = math.sqrt(disc)
        u = -0.5 * q + sq
        # -0.5*q - sq cancels when |p| << q; use (q^2/4 - disc) = -p^3/27
        v = (c1 / 3.0) ** 3 / u
        return _cbrt(u) + _cbrt(v)
    # three real roots; the k = 0 branch is the largest
    rad = math.sqrt(c1 / 3.0)
    arg = 1.5 * (c0 / c1) * (1.0 / rad)
    arg = min(1.0, max(-1.0, arg))
    return 2.0 * rad * math.cos(math.acos(arg) / 3.0)


def _prox_half(nu: float, s: float) -> float:
    """Smallest minimizer of (x-s)^2/(2 nu) + sqrt(x) over x >= 0."""
    thr = 1.5 * nu ** (2.0 / 3.0)
    if s <= thr:
        return 0.0
    # largest root of y^3 - s*y + nu/2 = 0 with x = y^2
    arg = 0.75 * math.sqrt(3.0) * nu / (s * math.sqrt(s))
    phi = math.acos(min(1.0, arg))
    x = (2.0 / 3.0) * s * (1.0 + math.cos(_TWO_PI_3 - (2.0 / 3.0) * phi))
    y = math.sqrt(x)
    for _ in range(2):  # Newton polish; the root is simple with p'(y) > 0
        y -= (y ** 3 - s * y + 0.5 * nu) / (3.0 * y * y - s)
    return y * y


def _prox_twothirds(nu: float, s: float) -> float:
    """Smallest minimizer of (x-s)^2/(2 nu) + x^(2/3) over x >= 0."""
    # stationary points solve y^4 - s*y + 2*nu/3 = 0 with x = y^3; Ferrari's
    # resolvent z^3 - (8*nu/3)*z - s^2 = 0 splits the quartic
    z = _largest_root_depressed_cubic(8.0 * nu / 3.0, s * s)
    if z <= 0:
        return 0.0
    rz = math.sqrt(z)
    disc = 2.0 * s / rz - z
    if disc < 0:
        if disc < -1e-12 * max(1.0, z):
            return 0.0
        disc = 0.0
    y = 0.5 * (rz + math.sqrt(disc))
    for _ in range(2):  # Newton polish on the quartic's outer root (q'(y) > 0)
        dq = 4.0 * y ** 3 - s
        if dq <= 0:
            break
        y -= (y ** 4 - s * y + 2.0 * nu / 3.0) / dq
    x = y ** 3
    cost_x = (x - s) ** 2 / (2.0 * nu) + _cbrt(x) ** 2
    cost_0 = s * s / (2.0 * nu)
    return x if cost_x < cost_0 else 0.0


def _prox_capped(spec: ThetaSpec, nu: float, s: float) -> float:
    """theta6 prox by exact stationary-point enumeration on each branch."""
    a, rho = spec.a, spec.rho
    t1, t2 = spec.breakpoints()

    def cost(x: float) -> float:
        return (x - s) ** 2 / (2.0 * nu) + theta_eval(spec, x)

    candidates = [0.0, t1, t2]
    x_ramp = s - nu * rho
    if 0.0 < x_ramp < t1:
        candidates.append(x_ramp)
    # blend branch is quadratic: (x-s)/nu + rho - c2*x + rho*(a+1)/(a^2-1) = 0
    c2 = rho * rho * (a + 1.0) ** 2 / (2.0 * (a * a - 1.0))
    denom = 1.0 / nu - c2
    if denom != 0.0:
        x_blend = (s / nu - rho - rho * (a + 1.0) / (a * a - 1.0)) / denom
        if t1 < x_blend < t2:
            candidates.append(x_blend)
    if s > t2:
        candidates.append(s)
    candidates.sort()
    best = candidates[0]
    best_cost = cost(best)
    for x in candidates[1:]:
        c = cost(x)
        if c < best_cost:
            best, best_cost = x, c
    return best


def prox_theta_scalar(spec: ThetaSpec, nu: float, s: float) -> float:
    """One element of ``argmin_x (1/(2*nu))*(x - s)**2 + theta(x)``.

    Requires nu > 0 and s >= 0; the smallest minimizer is returned, so the
    result is 0 whenever 0 attains the optimal cost.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s == 0.0:
        return 0.0
    k = spec.kind
    if k == 1:
        return s if s > math.sqrt(2.0 * nu) else 0.0
    if k == 2:
        return s / (1.0 + 2.0 * nu)
    if k == 3:
        return max(s - nu, 0.0)
    if k == 4:
        return _prox_half(nu, s)
    if k == 5:
        return _prox_twothirds(nu, s)
    return _prox_capped(spec, nu, s)


def prox_column(spec: ThetaSpec, lam: float, gamma: float, u: np.ndarray) -> np.ndarray:
    """Minimizer of ``0.5*||gamma*x - u||^2 + lam*theta(||x||)`` over vectors x."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    u = np.asarray(u, dtype=float)
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        return np.zeros_like(u)
    mag = prox_theta_scalar(spec, lam / gamma ** 2, norm / gamma)
    return (mag / norm) * u
