"""Polynomial exterior calculus on the plane R^2 (cover of T^2 / chart for
planar toy groups).

Mirrors the trig-poly form interface closely enough that the curve / chain
quadrature in `trigcalc` accepts these forms unchanged (duck typing via
`base == "R2"`, `degree`, `vdim`, `evaluate_coframe`).  Coefficients are
dense matrices c[i, j] multiplying x^i y^j; all ring operations are exact.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as npoly


class Poly2:
    """Real polynomial in two variables, coefficient matrix c[i,j] x^i y^j."""

    def __init__(self, coeffs):
        c = np.atleast_2d(np.asarray(coeffs, dtype=float))
        self.c = c

    @classmethod
    def zero(cls) -> "Poly2":
        return cls([[0.0]])

    @classmethod
    def constant(cls, v: float) -> "Poly2":
        return cls([[float(v)]])

    @classmethod
    def coordinate(cls, axis: int) -> "Poly2":
        if axis == 0:
            return cls([[0.0], [1.0]])  # x
        return cls([[0.0, 1.0]])  # y

    def __call__(self, x, y):
        return npoly.polyval2d(np.asarray(x, dtype=float), np.asarray(y, dtype=float), self.c)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            out = self.c.copy()
            out[0, 0] += other
            return Poly2(out)
        n1 = max(self.c.shape[0], other.c.shape[0])
        n2 = max(self.c.shape[1], other.c.shape[1])
        out = np.zeros((n1, n2))
        out[: self.c.shape[0], : self.c.shape[1]] += self.c
        out[: other.c.shape[0], : other.c.shape[1]] += other.c
        return Poly2(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly2(-self.c)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Poly2(self.c * other)
        a, b = self.c, other.c
        out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                if a[i, j] != 0.0:
                    out[i : i + b.shape[0], j : j + b.shape[1]] += a[i, j] * b
        return Poly2(out)

    __rmul__ = __mul__

    def partial(self, axis: int) -> "Poly2":
        c = npoly.polyder(self.c, axis=axis)
        return Poly2(c)

    def antiderivative(self, axis: int) -> "Poly2":
        return Poly2(npoly.polyint(self.c, axis=axis))

    def shift(self, dx: float, dy: float) -> "Poly2":
        """p(x + dx, y + dy), exact (binomial expansion)."""
        n1, n2 = self.c.shape
        out = np.zeros_like(self.c)
        binom = _binomial_table(max(n1, n2))
        for i in range(n1):
            for j in range(n2):
                if self.c[i, j] == 0.0:
                    continue
                for a in range(i + 1):
                    for b in range(j + 1):
                        out[a, b] += (
                            self.c[i, j]
                            * binom[i, a] * dx ** (i - a)
                            * binom[j, b] * dy ** (j - b)
                        )
        return Poly2(out)

    def sup_on(self, radius: float = 1.0, n: int = 41) -> float:
        g = np.linspace(-radius, radius, n)
        xx, yy = np.meshgrid(g, g)
        return float(np.max(np.abs(self(xx, yy))))

    def __repr__(self):
        return f"Poly2(shape={self.c.shape})"


def _binomial_table(n: int) -> np.ndarray:
    t = np.zeros((n + 1, n + 1))
    t[:, 0] = 1.0
    for i in range(1, n + 1):
        for j in range(1, i + 1):
            t[i, j] = t[i - 1, j - 1] + t[i - 1, j]
    return t


_COFRAME = {0: 1, 1: 2, 2: 1}


class PlaneVForm:
    """Vector-valued polynomial form on R^2; coframe [1] / [dx, dy] / [dx^dy]."""

    base = "R2"

    def __init__(self, degree: int, comps):
        comps = [list(row) for row in comps]
        if len(comps) != _COFRAME[degree]:
            raise ValueError("wrong coframe size")
        widths = {len(r) for r in comps}
        if len(widths) != 1:
            raise ValueError("ragged components")
        self.degree = degree
        self.vdim = widths.pop()
        self.comps = comps

    @classmethod
    def zero(cls, degree: int, vdim: int = 1) -> "PlaneVForm":
        return cls(degree, [[Poly2.zero() for _ in range(vdim)] for _ in range(_COFRAME[degree])])

    @classmethod
    def function(cls, scalars) -> "PlaneVForm":
        scalars = scalars if isinstance(scalars, (list, tuple)) else [scalars]
        return cls(0, [list(scalars)])

    @classmethod
    def one_form(cls, dx_row, dy_row) -> "PlaneVForm":
        dx_row = dx_row if isinstance(dx_row, (list, tuple)) else [dx_row]
        dy_row = dy_row if isinstance(dy_row, (list, tuple)) else [dy_row]
        return cls(1, [list(dx_row), list(dy_row)])

    @classmethod
    def area_form(cls, scalars) -> "PlaneVForm":
        scalars = scalars if isinstance(scalars, (list, tuple)) else [scalars]
        return cls(2, [list(scalars)])

    def __add__(self, other):
        comps = [[p + q for p, q in zip(r1, r2)] for r1, r2 in zip(self.comps, other.comps)]
        return PlaneVForm(self.degree, comps)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return PlaneVForm(self.degree, [[-p for p in r] for r in self.comps])

    def __mul__(self, s):
        return PlaneVForm(self.degree, [[p * s for p in r] for r in self.comps])

    __rmul__ = __mul__

    def d(self) -> "PlaneVForm":
        if self.degree == 0:
            row = self.comps[0]
            return PlaneVForm(1, [[p.partial(0) for p in row], [p.partial(1) for p in row]])
        if self.degree == 1:
            p_row, q_row = self.comps
            return PlaneVForm(2, [[q.partial(0) - p.partial(1) for p, q in zip(p_row, q_row)]])
        return PlaneVForm.zero(2, self.vdim)

    def interior_const(self, vec) -> "PlaneVForm":
        """Interior product with a constant vector field."""
        v = np.asarray(vec, dtype=float).reshape(2)
        if self.degree == 1:
            row = [p * v[0] + q * v[1] for p, q in zip(self.comps[0], self.comps[1])]
            return PlaneVForm(0, [row])
        if self.degree == 2:
            r_row = self.comps[0]
            return PlaneVForm(1, [[r * (-v[1]) for r in r_row], [r * v[0] for r in r_row]])
        raise ValueError("interior product of a 0-form is undefined")

    def pullback_translation(self, dx: float, dy: float) -> "PlaneVForm":
        """Pullback under the translation (x, y) -> (x + dx, y + dy)."""
        return PlaneVForm(self.degree, [[p.shift(dx, dy) for p in r] for r in self.comps])

    def evaluate_coframe(self, x, y) -> np.ndarray:
        return np.array([[np.asarray(p(x, y)) for p in row] for row in self.comps])

    def sup_norm(self, radius: float = 1.0) -> float:
        return max(p.sup_on(radius) for row in self.comps for p in row)

    def __repr__(self):
        return f"PlaneVForm(degree={self.degree}, vdim={self.vdim})"


def plane_primitive(beta: PlaneVForm, base_point=(0.0, 0.0)) -> PlaneVForm:
    """Primitive f (with f(base_point) = 0) of a closed polynomial 1-form:
    f(x,y) = int_{x0}^{x} beta_1(s, y0) ds + int_{y0}^{y} beta_2(x, s) ds."""
    if beta.degree != 1:
        raise ValueError("need a 1-form")
    x0, y0 = base_point
    prims = []
    for p, q in zip(beta.comps[0], beta.comps[1]):
        fx = p.antiderivative(0)  # d/dx fx = p
        # restrictions to y = y0 are polynomials in x: sum_j c[:, j] y0^j
        fx_y0 = Poly2((fx.c @ (y0 ** np.arange(fx.c.shape[1]))).reshape(-1, 1))
        fy = q.antiderivative(1)  # d/dy fy = q
        fy_y0 = Poly2((fy.c @ (y0 ** np.arange(fy.c.shape[1]))).reshape(-1, 1))
        f = fx_y0 + fy - fy_y0
        f = f - float(f(x0, y0))
        prims.append(f)
    f_form = PlaneVForm.function(prims)
    res = f_form.d() - beta
    if res.sup_norm() > 1e-9:
        raise ValueError(f"1-form is not closed (residual {res.sup_norm():.2e})")
    return f_form
