"""Closed-form manufactured solution on the unit square (characteristic length 1).

All evaluators are vectorized over coordinate arrays ``x, y``; vector fields
are returned as ``(fx, fy)`` tuples.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PI = np.pi


@dataclass(frozen=True)
class MmsFields:
    kappa: float = 1.0
    zeta: float = 1.0

    def u(self, x, y):
        return np.cos(PI * x) * np.cos(PI * y)

    def e(self, x, y):
        return (-PI * np.sin(PI * x) * np.cos(PI * y),
                -PI * np.cos(PI * x) * np.sin(PI * y))

    grad_u = e

    def e_tilde(self, x, y):
        ex, ey = self.e(x, y)
        return ex + np.sin(4 * PI * x) / 20.0, ey + np.sin(4 * PI * y) / 20.0

    def s(self, x, y):
        # -(e/|e|)(|e| - |e|^3/40) without the removable singularity at e = 0
        ex, ey = self.e(x, y)
        g = 1.0 - (ex * ex + ey * ey) / 40.0
        return -ex * g, -ey * g

    def lam(self, x, y):
        return -(np.cos(2 * PI * x) + np.cos(2 * PI * y)) / (40.0 * PI)

    def grad_lam(self, x, y):
        return np.sin(2 * PI * x) / 20.0, np.sin(2 * PI * y) / 20.0

    def mu(self, x, y):
        return np.sin(4 * PI * x) / 20.0, np.sin(4 * PI * y) / 20.0

    def s_tilde(self, x, y):
        sx, sy = self.s(x, y)
        gx, gy = self.grad_lam(x, y)
        return sx - gx / self.kappa, sy - gy / self.kappa

    def div_e(self, x, y):
        return -2.0 * PI**2 * self.u(x, y)

    def div_s(self, x, y):
        ex, ey = self.e(x, y)
        hxx = -PI**2 * self.u(x, y)
        hxy = PI**2 * np.sin(PI * x) * np.sin(PI * y)
        ee = ex * ex + ey * ey
        eHe = hxx * (ex * ex + ey * ey) + 2.0 * hxy * ex * ey  # hyy == hxx
        # div(e |e|^2) = |e|^2 div e + 2 e.H.e
        return -self.div_e(x, y) + (ee * self.div_e(x, y) + 2.0 * eHe) / 40.0

    def div_mu(self, x, y):
        return (PI / 5.0) * (np.cos(4 * PI * x) + np.cos(4 * PI * y))

    def q(self, x, y):
        return self.zeta * self.u(x, y) + self.div_s(x, y)

    def f(self, x, y):
        return self.zeta * self.lam(x, y) + self.div_mu(x, y)


def mms_eval(point, kappa=1.0, zeta=1.0):
    """All manufactured fields at one point, as a dict of floats / 2-arrays."""
    m = MmsFields(kappa, zeta)
    x, y = float(point[0]), float(point[1])
    out = {}
    for name in ("u", "e", "e_tilde", "s", "lam", "mu", "s_tilde"):
        v = getattr(m, name)(x, y)
        out[name] = float(v) if np.ndim(v) == 0 else np.array(v, dtype=float)
    return out


def mms_sources(point, zeta=1.0, kappa=1.0):
    """Balance source ``q`` and dual source ``f`` at one point."""
    m = MmsFields(kappa, zeta)
    x, y = float(point[0]), float(point[1])
    return float(m.q(x, y)), float(m.f(x, y))
