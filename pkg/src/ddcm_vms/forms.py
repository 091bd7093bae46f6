"""Generic bilinear/linear form assembly for multi-component equal-order spaces.

A field expression is a list of rows; each row is a list of ``Term``s whose
sum is one scalar component of the expression. An integrand is the pairing
``sum_k P_k(trial) * Q_k(test)`` of two expressions with equal row counts.
All components share the scalar space of one ``FeSpace``.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .fespace import quadrature
from .sparse import TripletBuffer

VALUE, DX, DY = 0, 1, 2


class Term(NamedTuple):
    coef: object  # float or per-element (M,) array
    comp: int
    deriv: int = VALUE


def val(c, a=1.0):
    return [[Term(a, c, VALUE)]]


def vec(cx, cy, a=1.0):
    return [[Term(a, cx, VALUE)], [Term(a, cy, VALUE)]]


def grad(c, a=1.0):
    return [[Term(a, c, DX)], [Term(a, c, DY)]]


def div(cx, cy, a=1.0):
    return [[Term(a, cx, DX), Term(a, cy, DY)]]


def add(*exprs):
    n = len(exprs[0])
    if any(len(e) != n for e in exprs):
        raise ValueError("expressions differ in row count")
    return [sum((list(e[k]) for e in exprs), []) for k in range(n)]


def scale(expr, a):
    return [[Term(t.coef * a, t.comp, t.deriv) for t in row] for row in expr]


def _is_zero(c):
    return np.all(np.asarray(c) == 0)


def _elem(c):
    """Broadcast a scalar or per-element coefficient against (M, a, b)."""
    c = np.asarray(c, dtype=float)
    return c if c.ndim == 0 else c[:, None, None]


class Assembler:
    """Accumulates element blocks for a system with ``n_comp`` components.

    The global index of scalar dof ``i`` of component ``c`` is
    ``c * n_scalar + i``.
    """

    def __init__(self, space, n_comp, quad_degree=None):
        self.space = space
        self.n_comp = int(n_comp)
        self.N = space.n_scalar
        self.dim = self.n_comp * self.N
        qd = 2 * space.degree + 2 if quad_degree is None else quad_degree
        self.rule = quadrature(qd)
        phi, g, self.wdet, self.xq = space.tabulate(self.rule)
        M = space.mesh.n_elements
        self._tables = (np.broadcast_to(phi, (M,) + phi.shape), g[..., 0], g[..., 1])
        self._K = {}
        self.blocks = {}  # (test comp, trial comp) -> (M, nloc, nloc)
        self.vectors = {}  # test comp -> (M, nloc)

    def table(self, d):
        """(M, nq, nloc) basis values or derivatives."""
        return self._tables[d]

    def K(self, d_test, d_trial):
        key = (d_test, d_trial)
        if key not in self._K:
            self._K[key] = np.einsum("eqa,eqb,eq->eab", self.table(d_test),
                                     self.table(d_trial), self.wdet)
        return self._K[key]

    def pair(self, trial, test, coef=1.0, transpose=False):
        """Add ``coef * <trial, test>``; ``transpose`` swaps trial/test roles."""
        if len(trial) != len(test):
            raise ValueError("pairing of expressions with different row counts")
        if _is_zero(coef):
            return
        for prow, qrow in zip(trial, test):
            for p in prow:
                for q in qrow:
                    c = coef * np.asarray(p.coef) * np.asarray(q.coef)
                    if _is_zero(c):
                        continue
                    if transpose:
                        key, loc = (p.comp, q.comp), _elem(c) * self.K(p.deriv, q.deriv)
                    else:
                        key, loc = (q.comp, p.comp), _elem(c) * self.K(q.deriv, p.deriv)
                    if key in self.blocks:
                        self.blocks[key] = self.blocks[key] + loc
                    else:
                        self.blocks[key] = loc

    def load(self, data, test, coef=1.0):
        """Add ``coef * <data, test>``; ``data`` holds (M, nq) arrays or None per row."""
        if len(data) != len(test):
            raise ValueError("data and test expression differ in row count")
        if _is_zero(coef):
            return
        cw = np.asarray(coef, dtype=float)
        cw = cw if cw.ndim == 0 else cw[:, None]
        for d, qrow in zip(data, test):
            if d is None:
                continue
            dw = cw * d * self.wdet
            for q in qrow:
                qc = np.asarray(q.coef, dtype=float)
                qc = qc if qc.ndim == 0 else qc[:, None]
                loc = np.einsum("eq,eqa->ea", dw, self.table(q.deriv)) * qc
                if q.comp in self.vectors:
                    self.vectors[q.comp] = self.vectors[q.comp] + loc
                else:
                    self.vectors[q.comp] = loc

    def triplets(self, buffer=None):
        """Scatter the accumulated blocks into a TripletBuffer (insertion order)."""
        buf = TripletBuffer((self.dim, self.dim)) if buffer is None else buffer
        dm = self.space.scalar_dof_map
        for (rc, cc), loc in self.blocks.items():
            rows = np.broadcast_to(rc * self.N + dm[:, :, None], loc.shape)
            cols = np.broadcast_to(cc * self.N + dm[:, None, :], loc.shape)
            buf.add(rows, cols, loc)
        return buf

    def vector(self):
        b = np.zeros(self.dim)
        dm = self.space.scalar_dof_map
        for c, loc in self.vectors.items():
            b += np.bincount((c * self.N + dm).ravel(), weights=loc.ravel(), minlength=self.dim)
        return b


def evaluate(space, coeffs, expr, n_comp, rule=None, tables=None):
    """Values of ``expr`` at quadrature points, one (M, nq) array per row.

    ``coeffs`` is the stacked coefficient vector of all components.
    """
    if tables is None:
        rule = quadrature(2 * space.degree + 2) if rule is None else rule
        phi, g, _, _ = space.tabulate(rule)
        M = space.mesh.n_elements
        tables = (np.broadcast_to(phi, (M,) + phi.shape), g[..., 0], g[..., 1])
    N = space.n_scalar
    dm = space.scalar_dof_map
    coeffs = np.asarray(coeffs, dtype=float)
    out = []
    for row in expr:
        acc = 0.0
        for t in row:
            loc = coeffs[t.comp * N + dm]  # (M, nloc)
            tc = np.asarray(t.coef, dtype=float)
            tc = tc if tc.ndim == 0 else tc[:, None]
            acc = acc + tc * np.einsum("eqa,ea->eq", tables[t.deriv], loc)
        out.append(acc if not np.isscalar(acc) else np.zeros(tables[0].shape[:2]))
    return out
