"""Pointwise asymmetric norm algebra for the Randers family.

A Randers norm combines a Riemannian part with a linear drift,

    F(v) = ||v||_M + <omega, v>,       ||v||_M = sqrt(<v, M v>),

and is a definite norm exactly when <omega, M^-1 omega> < 1.  Its dual
F*(p) = max{<p, v> : F(v) = 1} is again of Randers form with parameters

    A = d^-2 M^-1 omega omega^T M^-1 + d^-1 M^-1,   b = -d^-1 M^-1 omega,

where d = 1 - <omega, M^-1 omega>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidMetricError

COMPAT_MARGIN = 1e-9


def _as_sym(M):
    M = np.asarray(M, dtype=np.float64).reshape(2, 2)
    if abs(M[0, 1] - M[1, 0]) > 1e-12 * (1 + abs(M[0, 1])):
        raise InvalidMetricError("tensor must be symmetric")
    return 0.5 * (M + M.T)


def _inv2(M):
    """Closed-form 2x2 inverse (adjugate over determinant)."""
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if det <= 0:
        raise InvalidMetricError("tensor is not positive definite")
    return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]]) / det


def _spd_check(M):
    if M[0, 0] <= 0 or M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0] <= 0:
        raise InvalidMetricError("tensor is not positive definite")


def check_compatibility(M, omega):
    """Definiteness margin of (M, omega): margin = 1 - <omega, M^-1 omega>.

    Returns (ok, margin) with ok = (margin > 0); raises on non-SPD M.
    """
    M = _as_sym(M)
    _spd_check(M)
    omega = np.asarray(omega, dtype=np.float64).reshape(2)
    margin = 1.0 - float(omega @ _inv2(M) @ omega)
    return margin > 0, margin


@dataclass(frozen=True)
class RandersNorm:
    M: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        M = _as_sym(self.M)
        omega = np.asarray(self.omega, dtype=np.float64).reshape(2)
        ok, margin = check_compatibility(M, omega)
        if not ok or margin < COMPAT_MARGIN:
            raise InvalidMetricError(
                f"compatibility margin {margin:.3e} below {COMPAT_MARGIN:.0e}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "omega", omega)

    def __call__(self, v):
        return eval_norm(self, v)


@dataclass(frozen=True)
class DualNorm:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = _as_sym(self.A)
        b = np.asarray(self.b, dtype=np.float64).reshape(2)
        ok, _ = check_compatibility(A, b)
        if not ok:
            raise InvalidMetricError("dual norm fails compatibility")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def __call__(self, p):
        p = np.asarray(p, dtype=np.float64).reshape(2)
        return float(np.sqrt(p @ self.A @ p) + self.b @ p)

    def as_randers(self):
        return RandersNorm(self.A, self.b)


def eval_norm(n, v):
    """F(v) = ||v||_M + <omega, v>; positive for v != 0."""
    v = np.asarray(v, dtype=np.float64).reshape(2)
    return float(np.sqrt(v @ n.M @ v) + n.omega @ v)


def dual(n):
    """Dual norm F*(p) = max{<p, v> : F(v) = 1} in closed form."""
    Minv = _inv2(n.M)
    w = Minv @ n.omega
    delta = 1.0 - float(n.omega @ w)
    if delta <= 0:
        raise InvalidMetricError("compatibility violated; no dual exists")
    A = np.outer(w, w) / (delta * delta) + Minv / delta
    b = -w / delta
    return DualNorm(A, b)


def gradient(n, v):
    """dF(v) = M v / ||v||_M + omega for v != 0."""
    v = np.asarray(v, dtype=np.float64).reshape(2)
    Mv = n.M @ v
    nv = np.sqrt(v @ Mv)
    if nv == 0:
        raise ValueError("norm gradient undefined at 0")
    return Mv / nv + n.omega


def anisotropy(n):
    """Extremes of F over the unit circle.

    Returns dict with rho_min, rho_max and rho = rho_max / rho_min.
    The extrema of f(t) = F((cos t, sin t)) are located by Newton on the
    angle from 4 seeded starts, with a dense scan fallback.
    """
    def f(t):
        return eval_norm(n, (np.cos(t), np.sin(t)))

    def fp(t):
        v = np.array([np.cos(t), np.sin(t)])
        vp = np.array([-np.sin(t), np.cos(t)])
        Mv = n.M @ v
        return float((vp @ Mv) / np.sqrt(v @ Mv) + n.omega @ vp)

    def fpp(t, h=1e-5):
        return (fp(t + h) - fp(t - h)) / (2 * h)

    ts = np.linspace(0.0, 2 * np.pi, 3600, endpoint=False)
    scan = np.array([f(t) for t in ts])
    seeds = [0.0, np.pi / 2, np.pi, 3 * np.pi / 2,
             ts[int(np.argmin(scan))], ts[int(np.argmax(scan))]]
    candidates = [float(scan.min()), float(scan.max())]
    for seed in seeds:
        t = seed
        for _ in range(60):
            d2 = fpp(t)
            if abs(d2) < 1e-14:
                break
            step = fp(t) / d2
            t -= step
            if abs(step) < 1e-13:
                break
        candidates.append(f(t))
    rho_min = float(min(candidates))
    rho_max = float(max(candidates))
    return {"rho_min": rho_min, "rho_max": rho_max,
            "rho": rho_max / rho_min}
