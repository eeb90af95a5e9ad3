"""Truncated Fourier calculus on the circle and the 2-torus.

Conventions
-----------
The circle is R/Z with coordinate x and period 1; the torus is (R/Z)^2 with
coordinates (x, y).  A real trigonometric polynomial of degree N on S^1 is

    f(x) = a0 + sum_{k=1}^{N} a_k cos(2 pi k x) + b_k sin(2 pi k x),

stored as (a0, a[1..N], b[1..N]).  On T^2 we store the complex exponential
coefficients C[k1, k2] of

    f(x, y) = sum_{|k1|<=N1, |k2|<=N2} C[k1, k2] exp(2 pi i (k1 x + k2 y)),

with Hermitian symmetry C[-k1, -k2] = conj(C[k1, k2]) enforced, in a dense
(2 N1 + 1) x (2 N2 + 1) array indexed by k + N.

Products and compositions are computed by sampling on an equispaced grid of
at least 2(N1+N2)+1 points per axis followed by DFT projection; on trig
polynomials this is *exact* (it is coefficient convolution in disguise), so
aliasing is controlled by degree bookkeeping rather than silent truncation.
Degrees add under products; any truncation is an explicit `truncate` call.

Differential forms are vector-valued (values in V = R^n, n <= 4) with one
scalar coefficient per coframe element per V-coordinate:

    S^1 : 0-forms [f],  1-forms [f dx],           2-forms structurally zero
    T^2 : 0-forms [f],  1-forms [P dx, Q dy],     2-forms [R dx^dy]

Full-period integrals are read off the constant coefficient (exact).  Line
integrals over piecewise-smooth curves and surface integrals over
parametrized 2-chains use composite Gauss-Legendre panels (order
`Resolution.quad_order`, `Resolution.quad_panels` panels per segment);
integrands are smooth so the panels converge at spectral-ish rates and are
well inside `Tolerances.quad` for the loop sizes used here.
"""

from __future__ import annotations

import json
import numpy as np

from .config import TOL, RES

__all__ = [
    "TrigPoly",
    "TrigPoly2",
    "VectorField",
    "LinearMap",
    "VForm",
    "Curve",
    "CurveSegment",
    "line_segment",
    "polyline_loop",
    "trig_curve",
    "Chain2",
    "cone_chain",
    "patch_chain",
    "project_circle",
    "project_torus",
    "eval_torus_batch",
    "exterior_derivative",
    "interior_and_lie",
    "integrate",
    "integrate_over_curve",
    "integrate_over_chain",
    "wedge",
    "divide",
    "loop_evaluations",
    "primitive_of_closed_1form",
    "NotExact",
    "BudgetExhausted",
    "random_trigpoly",
    "random_trigpoly2",
    "random_vector_field",
    "dumps",
    "loads",
]

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# scalar trig polynomials, 1D
# ---------------------------------------------------------------------------

class TrigPoly:
    """Real trigonometric polynomial on S^1 = R/Z."""

    def __init__(self, a0=0.0, a=(), b=()):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if a.size == 0:
            a = np.zeros(0)
        if b.size == 0:
            b = np.zeros(0)
        n = max(a.size, b.size)
        self.a = np.zeros(n)
        self.b = np.zeros(n)
        self.a[: a.size] = a
        self.b[: b.size] = b
        self.a0 = float(a0)

    # -- basic structure ----------------------------------------------------

    @property
    def degree(self) -> int:
        return self.a.size

    @classmethod
    def constant(cls, c: float) -> "TrigPoly":
        return cls(a0=c)

    @classmethod
    def zero(cls) -> "TrigPoly":
        return cls()

    @classmethod
    def harmonic(cls, k: int, cos_coeff=0.0, sin_coeff=0.0) -> "TrigPoly":
        a = np.zeros(k)
        b = np.zeros(k)
        a[k - 1] = cos_coeff
        b[k - 1] = sin_coeff
        return cls(0.0, a, b)

    def copy(self) -> "TrigPoly":
        return TrigPoly(self.a0, self.a.copy(), self.b.copy())

    def padded(self, degree: int) -> "TrigPoly":
        if degree < self.degree:
            raise ValueError("padded() cannot lower the degree; use truncate()")
        a = np.zeros(degree)
        b = np.zeros(degree)
        a[: self.degree] = self.a
        b[: self.degree] = self.b
        return TrigPoly(self.a0, a, b)

    def truncate(self, degree: int) -> "TrigPoly":
        """Explicitly drop modes above `degree` (the only lossy operation)."""
        return TrigPoly(self.a0, self.a[:degree].copy(), self.b[:degree].copy())

    def trimmed(self, tol: float = 0.0) -> "TrigPoly":
        """Drop trailing coefficient pairs of magnitude <= tol."""
        n = self.degree
        while n > 0 and abs(self.a[n - 1]) <= tol and abs(self.b[n - 1]) <= tol:
            n -= 1
        return self.truncate(n)

    # -- evaluation and sampling ---------------------------------------------

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.a0)
        if self.degree:
            k = np.arange(1, self.degree + 1)
            ang = TWO_PI * np.multiply.outer(x, k)
            out = out + np.cos(ang) @ self.a + np.sin(ang) @ self.b
        return out

    def sample(self, m: int) -> np.ndarray:
        """Values on the equispaced grid x_j = j/m (exact via the definition)."""
        return self(np.arange(m) / m)

    # -- algebra --------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return TrigPoly(self.a0 + other, self.a.copy(), self.b.copy())
        n = max(self.degree, other.degree)
        p, q = self.padded(n), other.padded(n)
        return TrigPoly(p.a0 + q.a0, p.a + q.a, p.b + q.b)

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly(-self.a0, -self.a, -self.b)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return TrigPoly(self.a0 * other, self.a * other, self.b * other)
        deg = self.degree + other.degree
        m = 2 * deg + 1
        vals = self.sample(m) * other.sample(m)
        return project_circle(vals, deg)

    __rmul__ = __mul__

    def derivative(self) -> "TrigPoly":
        if self.degree == 0:
            return TrigPoly.zero()
        k = np.arange(1, self.degree + 1)
        return TrigPoly(0.0, TWO_PI * k * self.b, -TWO_PI * k * self.a)

    def periodic_primitive(self) -> "TrigPoly":
        """Mean-zero primitive; only valid up to the (dropped) a0*x term,
        so callers must check `mean` first when exactness matters."""
        if self.degree == 0:
            return TrigPoly.zero()
        k = np.arange(1, self.degree + 1)
        return TrigPoly(0.0, -self.b / (TWO_PI * k), self.a / (TWO_PI * k))

    @property
    def mean(self) -> float:
        """Integral over one full period (exact: the constant coefficient)."""
        return self.a0

    def sup_norm(self) -> float:
        m = max(64, 4 * self.degree + 9)
        return float(np.max(np.abs(self.sample(m))))

    def coeff_norm(self) -> float:
        return abs(self.a0) + float(np.sum(np.abs(self.a)) + np.sum(np.abs(self.b)))

    def __repr__(self):
        return f"TrigPoly(degree={self.degree}, a0={self.a0:+.3e})"

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "type": "trigpoly",
            "degree": int(self.degree),
            "basis": "constant+cos+sin",
            "ordering": "cos[k-1], sin[k-1] multiply cos(2 pi k x), sin(2 pi k x)",
            "a0": self.a0,
            "cos": self.a.tolist(),
            "sin": self.b.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrigPoly":
        if d.get("type") != "trigpoly":
            raise ValueError(f"not a trigpoly payload: {d.get('type')!r}")
        p = cls(d.get("a0", 0.0), d.get("cos", ()), d.get("sin", ()))
        if p.degree != int(d["degree"]):
            raise ValueError("declared degree does not match coefficient count")
        return p


def project_circle(values: np.ndarray, degree: int) -> TrigPoly:
    """Project grid samples (on x_j = j/m) onto degree-`degree` trig polys.

    Exact when `values` are the samples of a trig poly of degree <= `degree`
    and m >= 2*degree + 1.
    """
    values = np.asarray(values, dtype=float)
    m = values.size
    if m < 2 * degree + 1:
        raise ValueError(f"need >= {2 * degree + 1} samples for degree {degree}, got {m}")
    spec = np.fft.rfft(values)
    a0 = spec[0].real / m
    if degree == 0:
        return TrigPoly(a0)
    a = 2.0 * spec[1 : degree + 1].real / m
    b = -2.0 * spec[1 : degree + 1].imag / m
    return TrigPoly(a0, a, b)


# ---------------------------------------------------------------------------
# scalar trig polynomials, 2D
# ---------------------------------------------------------------------------

def eval_torus_batch(polys, x, y):
    """Values of several TrigPoly2 at common points, sharing the Fourier
    basis matrices (the dominant cost for off-grid evaluation)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x, y = np.broadcast_arrays(x, y)
    shape = x.shape
    n1 = max(p.degrees[0] for p in polys)
    n2 = max(p.degrees[1] for p in polys)
    e1 = np.exp(TWO_PI * 1j * np.multiply.outer(x.ravel(), np.arange(-n1, n1 + 1)))
    e2 = np.exp(TWO_PI * 1j * np.multiply.outer(y.ravel(), np.arange(-n2, n2 + 1)))
    out = []
    for p in polys:
        m1, m2 = p.degrees
        sub1 = e1[:, n1 - m1:n1 + m1 + 1]
        sub2 = e2[:, n2 - m2:n2 + m2 + 1]
        vals = ((sub1 @ p.c) * sub2).sum(axis=1).real
        out.append(vals.reshape(shape))
    return out


class TrigPoly2:
    """Real trig polynomial on T^2, stored as a dense complex spectrum."""

    def __init__(self, coeffs: np.ndarray):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[0] % 2 == 0 or c.shape[1] % 2 == 0:
            raise ValueError("coefficient array must be (2 N1 + 1) x (2 N2 + 1)")
        # enforce Hermitian symmetry so evaluations are real
        herm = 0.5 * (c + np.conj(c[::-1, ::-1]))
        self.c = herm

    # -- basic structure ----------------------------------------------------

    @property
    def degrees(self) -> tuple[int, int]:
        return (self.c.shape[0] - 1) // 2, (self.c.shape[1] - 1) // 2

    @classmethod
    def zero(cls, degrees=(0, 0)) -> "TrigPoly2":
        n1, n2 = degrees
        return cls(np.zeros((2 * n1 + 1, 2 * n2 + 1), dtype=complex))

    @classmethod
    def constant(cls, value: float, degrees=(0, 0)) -> "TrigPoly2":
        p = cls.zero(degrees)
        n1, n2 = p.degrees
        p.c[n1, n2] = value
        return p

    @classmethod
    def from_mode(cls, k1: int, k2: int, coeff: complex, degrees=None) -> "TrigPoly2":
        """The real part 2 Re(coeff * e^{2 pi i (k1 x + k2 y)}) (or the constant
        for k = 0)."""
        n1 = abs(k1) if degrees is None else degrees[0]
        n2 = abs(k2) if degrees is None else degrees[1]
        p = cls.zero((n1, n2))
        if k1 == 0 and k2 == 0:
            p.c[n1, n2] = np.real(coeff)
        else:
            p.c[n1 + k1, n2 + k2] = coeff
            p.c[n1 - k1, n2 - k2] = np.conj(coeff)
        return p

    @classmethod
    def from_separable(cls, fx: TrigPoly, fy: TrigPoly) -> "TrigPoly2":
        """Outer product f(x) g(y)."""
        cx = _circle_spectrum(fx)
        cy = _circle_spectrum(fy)
        return cls(np.outer(cx, cy))

    def copy(self) -> "TrigPoly2":
        return TrigPoly2(self.c.copy())

    def padded(self, degrees) -> "TrigPoly2":
        n1, n2 = self.degrees
        m1, m2 = degrees
        if m1 < n1 or m2 < n2:
            raise ValueError("padded() cannot lower the degrees; use truncate()")
        out = np.zeros((2 * m1 + 1, 2 * m2 + 1), dtype=complex)
        out[m1 - n1 : m1 + n1 + 1, m2 - n2 : m2 + n2 + 1] = self.c
        return TrigPoly2(out)

    def truncate(self, degrees) -> "TrigPoly2":
        n1, n2 = self.degrees
        m1, m2 = min(degrees[0], n1), min(degrees[1], n2)
        return TrigPoly2(self.c[n1 - m1 : n1 + m1 + 1, n2 - m2 : n2 + m2 + 1].copy())

    def trimmed(self, tol: float = 0.0) -> "TrigPoly2":
        n1, n2 = self.degrees
        m1, m2 = n1, n2
        while m1 > 0 and np.max(np.abs(self.c[[n1 - m1, n1 + m1], :])) <= tol:
            m1 -= 1
        while m2 > 0 and np.max(np.abs(self.c[:, [n2 - m2, n2 + m2]])) <= tol:
            m2 -= 1
        return self.truncate((m1, m2))

    # -- evaluation and sampling ---------------------------------------------

    def __call__(self, x, y):
        out = eval_torus_batch([self], x, y)[0]
        return out if np.ndim(out) else float(out)

    def sample(self, m1: int, m2: int) -> np.ndarray:
        """Values on the grid (i/m1, j/m2); exact spectral resampling."""
        n1, n2 = self.degrees
        if m1 < 2 * n1 + 1 or m2 < 2 * n2 + 1:
            raise ValueError("sampling grid below Nyquist for this degree")
        spec = np.zeros((m1, m2), dtype=complex)
        k1 = np.arange(-n1, n1 + 1) % m1
        k2 = np.arange(-n2, n2 + 1) % m2
        spec[np.ix_(k1, k2)] = self.c
        return np.real(np.fft.ifft2(spec)) * m1 * m2

    # -- algebra --------------------------------------------------------------

    def _binary(self, other, op):
        n1 = max(self.degrees[0], other.degrees[0])
        n2 = max(self.degrees[1], other.degrees[1])
        return TrigPoly2(op(self.padded((n1, n2)).c, other.padded((n1, n2)).c))

    def __add__(self, other):
        if isinstance(other, (int, float)):
            out = self.copy()
            n1, n2 = self.degrees
            out.c[n1, n2] += other
            return out
        return self._binary(other, np.add)

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly2(-self.c)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return TrigPoly2(self.c * other)
        n1, n2 = self.degrees
        m1, m2 = other.degrees
        d1, d2 = n1 + m1, n2 + m2
        g1, g2 = 2 * d1 + 1, 2 * d2 + 1
        vals = self.sample(g1, g2) * other.sample(g1, g2)
        return project_torus(vals, (d1, d2))

    __rmul__ = __mul__

    def partial(self, axis: int) -> "TrigPoly2":
        n1, n2 = self.degrees
        k1 = np.arange(-n1, n1 + 1)
        k2 = np.arange(-n2, n2 + 1)
        if axis == 0:
            factor = TWO_PI * 1j * k1[:, None]
        elif axis == 1:
            factor = TWO_PI * 1j * k2[None, :]
        else:
            raise ValueError("axis must be 0 (x) or 1 (y)")
        return TrigPoly2(self.c * factor)

    @property
    def mean(self) -> float:
        n1, n2 = self.degrees
        return float(self.c[n1, n2].real)

    def mean_over_axis(self, axis: int) -> TrigPoly:
        """Average over one coordinate; returns a TrigPoly in the other."""
        n1, n2 = self.degrees
        if axis == 0:
            return _circle_from_spectrum(self.c[n1, :])
        return _circle_from_spectrum(self.c[:, n2])

    def slice_at(self, axis: int, value: float) -> TrigPoly:
        """Restrict one coordinate to a constant; TrigPoly in the other."""
        n1, n2 = self.degrees
        if axis == 0:
            k = np.arange(-n1, n1 + 1)
            phases = np.exp(TWO_PI * 1j * k * value)
            return _circle_from_spectrum(phases @ self.c)
        k = np.arange(-n2, n2 + 1)
        phases = np.exp(TWO_PI * 1j * k * value)
        return _circle_from_spectrum(self.c @ phases)

    def sup_norm(self) -> float:
        n1, n2 = self.degrees
        g1 = max(32, 4 * n1 + 5)
        g2 = max(32, 4 * n2 + 5)
        return float(np.max(np.abs(self.sample(g1, g2))))

    def coeff_norm(self) -> float:
        return float(np.sum(np.abs(self.c)))

    def __repr__(self):
        return f"TrigPoly2(degrees={self.degrees})"

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "type": "trigpoly2",
            "degrees": [int(d) for d in self.degrees],
            "basis": "complex-exponential",
            "ordering": "row k1+N1, column k2+N2 multiplies exp(2 pi i (k1 x + k2 y))",
            "re": self.c.real.tolist(),
            "im": self.c.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrigPoly2":
        if d.get("type") != "trigpoly2":
            raise ValueError(f"not a trigpoly2 payload: {d.get('type')!r}")
        c = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
        p = cls(c)
        if list(p.degrees) != [int(v) for v in d["degrees"]]:
            raise ValueError("declared degrees do not match coefficient shape")
        return p


def _circle_spectrum(p: TrigPoly) -> np.ndarray:
    """Complex exponential coefficients of a TrigPoly, index k+N."""
    n = p.degree
    c = np.zeros(2 * n + 1, dtype=complex)
    c[n] = p.a0
    for k in range(1, n + 1):
        c[n + k] = 0.5 * (p.a[k - 1] - 1j * p.b[k - 1])
        c[n - k] = 0.5 * (p.a[k - 1] + 1j * p.b[k - 1])
    return c


def _circle_from_spectrum(c: np.ndarray) -> TrigPoly:
    n = (c.size - 1) // 2
    a0 = c[n].real
    if n == 0:
        return TrigPoly(a0)
    pos = c[n + 1 :]
    neg = c[n - 1 :: -1]
    a = (pos + neg).real
    b = (1j * (pos - neg)).real
    return TrigPoly(a0, a, b)


def project_torus(values: np.ndarray, degrees) -> TrigPoly2:
    """Project grid samples on (i/m1, j/m2) onto the given degrees (exact
    for trig polys within the degrees, grids above Nyquist)."""
    values = np.asarray(values, dtype=float)
    m1, m2 = values.shape
    n1, n2 = degrees
    if m1 < 2 * n1 + 1 or m2 < 2 * n2 + 1:
        raise ValueError("sampling grid below Nyquist for requested degrees")
    spec = np.fft.fft2(values) / (m1 * m2)
    k1 = np.arange(-n1, n1 + 1) % m1
    k2 = np.arange(-n2, n2 + 1) % m2
    return TrigPoly2(spec[np.ix_(k1, k2)])


def divide(num, den, degrees, tol=None):
    """Pointwise num/den projected to `degrees`; returns (quotient, residual).

    residual = sup |num - den * quotient| on a dense grid.  Raises if the
    denominator is not bounded away from zero.
    """
    tol = TOL.mono if tol is None else tol
    if isinstance(num, TrigPoly):
        deg = int(degrees)
        m = RES.oversample * (2 * deg + 1)
        dv = den.sample(m) if isinstance(den, TrigPoly) else np.full(m, float(den))
        if np.min(np.abs(dv)) <= tol:
            raise ZeroDivisionError("denominator not bounded away from zero")
        q = project_circle(num.sample(m) / dv, deg)
        res = (num - den * q).sup_norm()
        return q, res
    n1, n2 = degrees
    g1, g2 = RES.oversample * (2 * n1 + 1), RES.oversample * (2 * n2 + 1)
    dv = den.sample(g1, g2)
    if np.min(np.abs(dv)) <= tol:
        raise ZeroDivisionError("denominator not bounded away from zero")
    q = project_torus(num.sample(g1, g2) / dv, (n1, n2))
    res = (num - den * q).sup_norm()
    return q, res


# ---------------------------------------------------------------------------
# vector fields and linear maps
# ---------------------------------------------------------------------------

_BASE_DIM = {"S1": 1, "T2": 2, "R2": 2}  # R2: polynomial forms (planecalc)


class VectorField:
    """Trig-polynomial vector field on S^1 or T^2 (components in the
    coordinate frame d/dx, d/dy)."""

    def __init__(self, base: str, comps):
        if base not in ("S1", "T2"):
            raise ValueError(f"trig vector fields live on S1/T2, not {base!r}")
        comps = tuple(comps)
        if len(comps) != _BASE_DIM[base]:
            raise ValueError(f"{base} needs {_BASE_DIM[base]} component(s)")
        self.base = base
        self.comps = comps

    @classmethod
    def on_circle(cls, p: TrigPoly) -> "VectorField":
        return cls("S1", (p,))

    @classmethod
    def on_torus(cls, p: TrigPoly2, q: TrigPoly2) -> "VectorField":
        return cls("T2", (p, q))

    @property
    def dim(self) -> int:
        return _BASE_DIM[self.base]

    def __add__(self, other):
        return VectorField(self.base, [p + q for p, q in zip(self.comps, other.comps)])

    def __sub__(self, other):
        return VectorField(self.base, [p - q for p, q in zip(self.comps, other.comps)])

    def __neg__(self):
        return VectorField(self.base, [-p for p in self.comps])

    def __mul__(self, s):
        return VectorField(self.base, [p * s for p in self.comps])

    __rmul__ = __mul__

    def evaluate(self, *coords) -> np.ndarray:
        """Component values at points; shape (dim,) + point-shape."""
        return np.array([np.asarray(p(*coords)) for p in self.comps])

    def apply_to(self, f):
        """Directional derivative X(f) of a scalar trig poly."""
        if self.base == "S1":
            return self.comps[0] * f.derivative()
        return self.comps[0] * f.partial(0) + self.comps[1] * f.partial(1)

    def bracket_std(self, other: "VectorField") -> "VectorField":
        """Standard commutator [X, Y] = X.grad(Y) - Y.grad(X)."""
        out = []
        for i in range(self.dim):
            out.append(self.apply_to(other.comps[i]) - other.apply_to(self.comps[i]))
        return VectorField(self.base, out)

    def divergence(self):
        if self.base == "S1":
            return self.comps[0].derivative()
        return self.comps[0].partial(0) + self.comps[1].partial(1)

    def sup_norm(self) -> float:
        return max(p.sup_norm() for p in self.comps)

    def __repr__(self):
        return f"VectorField({self.base})"


class LinearMap:
    """Linear map of the value space V = R^n (n <= 4)."""

    def __init__(self, matrix):
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        if m.shape[0] != m.shape[1] or m.shape[0] > 4:
            raise ValueError("need a square matrix of size <= 4")
        self.m = m

    @classmethod
    def identity(cls, n: int) -> "LinearMap":
        return cls(np.eye(n))

    @classmethod
    def scaling(cls, s: float, n: int = 1) -> "LinearMap":
        return cls(s * np.eye(n))

    @property
    def n(self) -> int:
        return self.m.shape[0]

    def __matmul__(self, other):
        if isinstance(other, LinearMap):
            return LinearMap(self.m @ other.m)
        return self.m @ np.asarray(other)

    def inverse(self) -> "LinearMap":
        if abs(np.linalg.det(self.m)) <= TOL.inv:
            raise ValueError("map is numerically singular")
        return LinearMap(np.linalg.inv(self.m))

    def __sub__(self, other):
        return LinearMap(self.m - other.m)

    def distance(self, other) -> float:
        return float(np.max(np.abs(self.m - other.m)))

    def __repr__(self):
        return f"LinearMap({self.m.tolist()})"


# ---------------------------------------------------------------------------
# vector-valued differential forms
# ---------------------------------------------------------------------------

def _coframe_size(base: str, degree: int) -> int:
    if base == "S1":
        return {0: 1, 1: 1, 2: 0}[degree]
    return {0: 1, 1: 2, 2: 1}[degree]


def _zero_scalar(base: str):
    return TrigPoly.zero() if base == "S1" else TrigPoly2.zero()


class VForm:
    """Differential form with values in V = R^n.

    comps[i][j] is the scalar coefficient of coframe element i for the j-th
    V-coordinate.  Coframe ordering: S^1: [1] / [dx]; T^2: [1] / [dx, dy] /
    [dx^dy].  2-forms on S^1 are structurally zero (empty coframe), kept as
    objects so d(1-form) is total rather than an error.
    """

    def __init__(self, base: str, degree: int, comps, vdim=None):
        if base not in ("S1", "T2"):
            raise ValueError(f"trig forms live on S1/T2, not {base!r}")
        if degree not in (0, 1, 2):
            raise ValueError("degree must be 0, 1 or 2")
        size = _coframe_size(base, degree)
        comps = [list(row) for row in comps]
        if len(comps) != size:
            raise ValueError(f"expected {size} coframe rows, got {len(comps)}")
        if size:
            widths = {len(row) for row in comps}
            if len(widths) != 1:
                raise ValueError("ragged component rows")
            vd = widths.pop()
        else:
            if vdim is None:
                raise ValueError("structurally zero form needs explicit vdim")
            vd = vdim
        if not 1 <= vd <= 4:
            raise ValueError("value dimension must be 1..4")
        self.base = base
        self.degree = degree
        self.vdim = vd
        self.comps = comps

    # -- constructors ---------------------------------------------------------

    @classmethod
    def zero(cls, base: str, degree: int, vdim: int = 1) -> "VForm":
        size = _coframe_size(base, degree)
        comps = [[_zero_scalar(base) for _ in range(vdim)] for _ in range(size)]
        return cls(base, degree, comps, vdim=vdim)

    @classmethod
    def function(cls, base: str, scalars) -> "VForm":
        scalars = scalars if isinstance(scalars, (list, tuple)) else [scalars]
        return cls(base, 0, [list(scalars)])

    @classmethod
    def one_form(cls, base: str, *coframe_rows) -> "VForm":
        rows = [list(r) if isinstance(r, (list, tuple)) else [r] for r in coframe_rows]
        return cls(base, 1, rows)

    @classmethod
    def area_form(cls, scalars) -> "VForm":
        scalars = scalars if isinstance(scalars, (list, tuple)) else [scalars]
        return cls("T2", 2, [list(scalars)])

    @property
    def is_structural_zero(self) -> bool:
        return _coframe_size(self.base, self.degree) == 0

    # -- linear structure -------------------------------------------------------

    def _check_compatible(self, other: "VForm"):
        if (self.base, self.degree, self.vdim) != (other.base, other.degree, other.vdim):
            raise ValueError("forms have different base/degree/value dimensions")

    def __add__(self, other):
        self._check_compatible(other)
        comps = [
            [p + q for p, q in zip(r1, r2)] for r1, r2 in zip(self.comps, other.comps)
        ]
        return VForm(self.base, self.degree, comps, vdim=self.vdim)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return VForm(
            self.base,
            self.degree,
            [[-p for p in row] for row in self.comps],
            vdim=self.vdim,
        )

    def __mul__(self, s):
        if isinstance(s, (TrigPoly, TrigPoly2)):
            comps = [[p * s for p in row] for row in self.comps]
        else:
            comps = [[p * float(s) for p in row] for row in self.comps]
        return VForm(self.base, self.degree, comps, vdim=self.vdim)

    __rmul__ = __mul__

    def map_values(self, u: LinearMap) -> "VForm":
        """Apply a linear map of V to the values: (u . f)_i = sum_j u_ij f_j."""
        if u.n != self.vdim:
            raise ValueError("linear map size does not match value dimension")
        comps = []
        for row in self.comps:
            new_row = []
            for i in range(self.vdim):
                acc = row[0] * u.m[i, 0]
                for j in range(1, self.vdim):
                    acc = acc + row[j] * u.m[i, j]
                new_row.append(acc)
            comps.append(new_row)
        return VForm(self.base, self.degree, comps, vdim=self.vdim)

    # -- calculus ---------------------------------------------------------------

    def d(self) -> "VForm":
        """Exterior derivative; d of a top form is the structural zero."""
        if self.base == "S1":
            if self.degree == 0:
                return VForm(
                    "S1", 1, [[p.derivative() for p in self.comps[0]]]
                )
            return VForm.zero("S1", 2, self.vdim)
        if self.degree == 0:
            row = self.comps[0]
            return VForm(
                "T2",
                1,
                [[p.partial(0) for p in row], [p.partial(1) for p in row]],
            )
        if self.degree == 1:
            p_row, q_row = self.comps
            return VForm(
                "T2",
                2,
                [[q.partial(0) - p.partial(1) for p, q in zip(p_row, q_row)]],
            )
        # d of the top form: no degree-3 slot on T^2, report the zero 2-form
        return VForm.zero("T2", 2, self.vdim)

    def interior(self, x: VectorField) -> "VForm":
        """Interior product i_X (degree drops by one)."""
        if x.base != self.base:
            raise ValueError("vector field and form live on different bases")
        if self.degree == 0:
            raise ValueError("interior product of a 0-form is undefined")
        if self.degree == 1:
            if self.base == "S1":
                row = [x.comps[0] * p for p in self.comps[0]]
            else:
                row = [
                    x.comps[0] * p + x.comps[1] * q
                    for p, q in zip(self.comps[0], self.comps[1])
                ]
            return VForm(self.base, 0, [row])
        # degree 2
        if self.base == "S1":
            return VForm.zero("S1", 1, self.vdim)
        r_row = self.comps[0]
        dx_row = [-(x.comps[1] * r) for r in r_row]
        dy_row = [x.comps[0] * r for r in r_row]
        return VForm("T2", 1, [dx_row, dy_row])

    def lie(self, x: VectorField) -> "VForm":
        """Lie derivative by Cartan's formula L_X = i_X d + d i_X."""
        if self.is_structural_zero:
            return VForm.zero(self.base, self.degree, self.vdim)
        if self.degree == 0:
            return self.d().interior(x)
        if self.base == "T2" and self.degree == 2:
            term1 = VForm.zero("T2", 2, self.vdim)  # i_X d(top form) = 0
        else:
            term1 = self.d().interior(x)
        return term1 + self.interior(x).d()

    # -- integration ---------------------------------------------------------------

    def full_period_integral(self) -> np.ndarray:
        """Integral over the whole base manifold (top degree only); exact."""
        if self.base == "S1":
            if self.degree != 1:
                if self.is_structural_zero:
                    return np.zeros(self.vdim)
                raise ValueError("full-period integral needs a top-degree form")
            return np.array([p.mean for p in self.comps[0]])
        if self.degree != 2:
            raise ValueError("full-period integral needs a top-degree form")
        return np.array([p.mean for p in self.comps[0]])

    def evaluate_coframe(self, *coords) -> np.ndarray:
        """Scalar coefficients at points: shape (coframe, vdim) + pts."""
        return np.array(
            [[np.asarray(p(*coords)) for p in row] for row in self.comps]
        )

    def sup_norm(self) -> float:
        if self.is_structural_zero:
            return 0.0
        return max(p.sup_norm() for row in self.comps for p in row)

    def __repr__(self):
        return f"VForm({self.base}, degree={self.degree}, vdim={self.vdim})"

    # -- serialization ----------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "type": "vform",
            "base": self.base,
            "degree": self.degree,
            "vdim": self.vdim,
            "coframe": {
                ("S1", 0): ["1"], ("S1", 1): ["dx"], ("S1", 2): [],
                ("T2", 0): ["1"], ("T2", 1): ["dx", "dy"], ("T2", 2): ["dx^dy"],
            }[(self.base, self.degree)],
            "comps": [[p.to_dict() for p in row] for row in self.comps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VForm":
        if d.get("type") != "vform":
            raise ValueError("not a vform payload")
        loader = TrigPoly.from_dict if d["base"] == "S1" else TrigPoly2.from_dict
        comps = [[loader(p) for p in row] for row in d["comps"]]
        return cls(d["base"], int(d["degree"]), comps, vdim=int(d["vdim"]))


def _structural_top_zero(form: VForm) -> VForm:
    # d of a top-degree form: on S^1 that is degree 2 (empty), on T^2 there is
    # no degree 3 slot, so we just report the zero 2-form of the right vdim.
    if form.base == "S1":
        return VForm.zero("S1", 2, form.vdim)
    return VForm.zero("T2", 2, form.vdim)


def wedge(alpha: VForm, beta: VForm) -> VForm:
    """Wedge of scalar-valued forms (vdim 1) where the result fits on the base."""
    if alpha.vdim != 1 or beta.vdim != 1:
        raise ValueError("wedge implemented for scalar-valued forms only")
    if alpha.base != beta.base:
        raise ValueError("mismatched bases")
    if alpha.degree == 0:
        return beta * alpha.comps[0][0]
    if beta.degree == 0:
        return alpha * beta.comps[0][0]
    if alpha.base == "T2" and alpha.degree == 1 and beta.degree == 1:
        p1, q1 = alpha.comps[0][0], alpha.comps[1][0]
        p2, q2 = beta.comps[0][0], beta.comps[1][0]
        return VForm.area_form(p1 * q2 - q1 * p2)
    if alpha.base == "S1" and alpha.degree == 1 and beta.degree == 1:
        return VForm.zero("S1", 2, 1)
    raise ValueError("wedge degree combination not supported on this base")


# ---------------------------------------------------------------------------
# curves and 2-chains
# ---------------------------------------------------------------------------

class CurveSegment:
    """One smooth piece t in [0,1] -> R^d (cover coordinates, so winding is
    explicit).  `point`/`velocity` must accept float arrays and return
    arrays of shape (d, len(t))."""

    def __init__(self, point, velocity, dim: int):
        self.point = point
        self.velocity = velocity
        self.dim = dim


class Curve:
    """Piecewise-smooth parametrized curve (a loop when closed() holds)."""

    def __init__(self, segments):
        segments = list(segments)
        if not segments:
            raise ValueError("curve needs at least one segment")
        dims = {s.dim for s in segments}
        if len(dims) != 1:
            raise ValueError("segments have mixed ambient dimensions")
        self.segments = segments
        self.dim = dims.pop()

    def start(self) -> np.ndarray:
        return self.segments[0].point(np.array([0.0]))[:, 0]

    def end(self) -> np.ndarray:
        return self.segments[-1].point(np.array([1.0]))[:, 0]

    def winding(self) -> np.ndarray:
        return self.end() - self.start()

    def is_closed_loop(self, tol: float = 1e-9) -> bool:
        """Closed on the quotient: endpoints differ by integers."""
        w = self.winding()
        return bool(np.max(np.abs(w - np.round(w))) < tol)

    def reversed(self) -> "Curve":
        segs = []
        for s in self.segments[::-1]:
            segs.append(
                CurveSegment(
                    lambda t, s=s: s.point(1.0 - t),
                    lambda t, s=s: -s.velocity(1.0 - t),
                    s.dim,
                )
            )
        return Curve(segs)

    def __add__(self, other: "Curve") -> "Curve":
        return Curve(self.segments + other.segments)


def line_segment(p, q) -> CurveSegment:
    p = np.asarray(p, dtype=float).reshape(-1)
    q = np.asarray(q, dtype=float).reshape(-1)

    def point(t, p=p, q=q):
        return p[:, None] + np.multiply.outer(q - p, np.asarray(t))

    def velocity(t, p=p, q=q):
        return np.repeat((q - p)[:, None], np.size(t), axis=1)

    return CurveSegment(point, velocity, p.size)


def polyline_loop(vertices) -> Curve:
    """Closed polyline through the given cover-coordinate vertices."""
    verts = [np.asarray(v, dtype=float).reshape(-1) for v in vertices]
    segs = [line_segment(verts[i], verts[(i + 1) % len(verts)]) for i in range(len(verts))]
    return Curve(segs)


def trig_curve(windings, polys) -> Curve:
    """One-segment curve c_i(t) = w_i t + p_i(t) with trig-poly wobble
    (p_i period 1 in t)."""
    w = np.asarray(windings, dtype=float).reshape(-1)
    polys = list(polys)
    dpolys = [p.derivative() for p in polys]

    def point(t):
        t = np.asarray(t, dtype=float)
        return np.array([w[i] * t + polys[i](t) for i in range(w.size)])

    def velocity(t):
        t = np.asarray(t, dtype=float)
        return np.array([np.full(t.shape, w[i]) + dpolys[i](t) for i in range(w.size)])

    return Curve([CurveSegment(point, velocity, w.size)])


class Chain2:
    """Parametrized 2-chain (t, s) in [0,1]^2 -> R^2 with explicit partials."""

    def __init__(self, point, d_t, d_s):
        self.point = point
        self.d_t = d_t
        self.d_s = d_s


def cone_chain(loop: Curve, center) -> list:
    """Star-shaped filling of a loop from a center point (one Chain2 per
    segment; radial seams cancel pairwise).  Parametrized as
    center + (1-s)(c(t) - center) so the s=0 boundary edge traverses the
    loop positively and Stokes holds with no extra sign."""
    center = np.asarray(center, dtype=float).reshape(-1)
    chains = []
    for seg in loop.segments:
        def point(t, s, seg=seg):
            c = seg.point(t)
            return center[:, None] + (1.0 - s) * (c - center[:, None])

        def d_t(t, s, seg=seg):
            return (1.0 - s) * seg.velocity(t)

        def d_s(t, s, seg=seg):
            return center[:, None] - seg.point(t)

        chains.append(Chain2(point, d_t, d_s))
    return chains


def patch_chain(corner, e1, e2) -> Chain2:
    """Flat parallelogram patch corner + t e1 + s e2."""
    corner = np.asarray(corner, dtype=float).reshape(-1)
    e1 = np.asarray(e1, dtype=float).reshape(-1)
    e2 = np.asarray(e2, dtype=float).reshape(-1)

    def point(t, s):
        return corner[:, None] + np.multiply.outer(e1, np.asarray(t)) + s * e2[:, None]

    def d_t(t, s):
        return np.repeat(e1[:, None], np.size(t), axis=1)

    def d_s(t, s):
        return np.repeat(e2[:, None], np.size(t), axis=1)

    return Chain2(point, d_t, d_s)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def _panel_nodes(panels: int, order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    h = 1.0 / panels
    t = np.concatenate([(nodes + 1.0) * 0.5 * h + i * h for i in range(panels)])
    w = np.tile(weights * 0.5 * h, panels)
    return t, w


def integrate_over_curve(form: VForm, curve: Curve, panels=None, order=None) -> np.ndarray:
    """Line integral of a (vector-valued) 1-form along a curve; returns the
    V-vector.  S^1 forms take 1-d curves (cover coordinate), T^2 forms 2-d."""
    if form.degree != 1:
        raise ValueError("line integrals take 1-forms")
    if curve.dim != _BASE_DIM[form.base]:
        raise ValueError("curve dimension does not match the form's base")
    panels = RES.quad_panels if panels is None else panels
    order = RES.quad_order if order is None else order
    t, w = _panel_nodes(panels, order)
    total = np.zeros(form.vdim)
    for seg in curve.segments:
        pts = seg.point(t)
        vel = seg.velocity(t)
        coeffs = form.evaluate_coframe(*pts)  # (coframe, vdim, npts)
        integrand = np.einsum("ivp,ip->vp", coeffs, vel)
        total = total + integrand @ w
    return total


def integrate_over_chain(form: VForm, chain, panels=None, order=None) -> np.ndarray:
    """Surface integral of a 2-form on T^2 (or the R^2 cover) over
    parametrized 2-chains; `chain` may be a Chain2 or a list of them."""
    if form.base not in ("T2", "R2") or form.degree != 2:
        raise ValueError("chain integrals take 2-forms on the torus/plane cover")
    chains = chain if isinstance(chain, (list, tuple)) else [chain]
    panels = RES.quad_panels if panels is None else panels
    order = RES.quad_order if order is None else order
    t, w = _panel_nodes(panels, order)
    total = np.zeros(form.vdim)
    for ch in chains:
        tt = np.repeat(t, t.size)
        ss = np.tile(t, t.size)
        ww = np.repeat(w, w.size) * np.tile(w, w.size)
        pts = ch.point(tt, ss)
        jt = ch.d_t(tt, ss)
        js = ch.d_s(tt, ss)
        det = jt[0] * js[1] - jt[1] * js[0]
        coeffs = form.evaluate_coframe(pts[0], pts[1])  # (1, vdim, npts)
        total = total + (coeffs[0] * det) @ ww
    return total


def integrate(form: VForm, domain, **kw) -> np.ndarray:
    """Dispatch: domain 'S1'/'T2' (full period, exact), a Curve (loop /
    1-chain, Gauss panels) or a Chain2 / list of Chain2 (2-chain)."""
    if isinstance(domain, str):
        if domain != form.base:
            raise ValueError("full-period domain must match the form's base")
        return form.full_period_integral()
    if isinstance(domain, Curve):
        return integrate_over_curve(form, domain, **kw)
    return integrate_over_chain(form, domain, **kw)


# ---------------------------------------------------------------------------
# exterior-calculus conveniences (module-level op names)
# ---------------------------------------------------------------------------

def exterior_derivative(form: VForm) -> VForm:
    return form.d()


def interior_and_lie(x: VectorField, form: VForm):
    """(i_X form, L_X form); the Lie derivative uses Cartan's identity."""
    ixf = form.interior(x) if form.degree > 0 else None
    lxf = form.lie(x)
    return ixf, lxf


# ---------------------------------------------------------------------------
# primitives of closed 1-forms (Fourier solve)
# ---------------------------------------------------------------------------

class NotExact(Exception):
    """A closed 1-form with non-vanishing loop evaluations (no primitive)."""

    def __init__(self, loop_evals: dict):
        self.loop_evals = loop_evals
        msg = ", ".join(f"{k}={np.asarray(v).tolist()}" for k, v in loop_evals.items())
        super().__init__(f"1-form has non-trivial loop evaluations: {msg}")


class BudgetExhausted(Exception):
    """Primitive solve left a residual above tolerance at the degree budget."""


def loop_evaluations(form: VForm) -> dict:
    """Evaluations of a 1-form on the fixed homology basis loops.

    S^1: 'base' = full circle.  T^2: 'base_x' over t -> (t, 0) and 'base_y'
    over t -> (0, t).  Exact coefficient arithmetic (mean over the running
    coordinate, slice at 0 in the other).
    """
    if form.degree != 1:
        raise ValueError("loop evaluations take 1-forms")
    if form.base == "S1":
        return {"base": np.array([p.mean for p in form.comps[0]])}
    # base_x runs t -> (t, 0): integrate the dx coefficient over x at y = 0;
    # base_y runs t -> (0, t): integrate the dy coefficient over y at x = 0.
    evx = [p.slice_at(1, 0.0).mean for p in form.comps[0]]
    evy = [q.slice_at(0, 0.0).mean for q in form.comps[1]]
    return {"base_x": np.array(evx), "base_y": np.array(evy)}


def primitive_of_closed_1form(form: VForm, budget=None):
    """Solve df = form for a trig-poly 0-form f (mean zero), exactly in
    coefficients.

    Returns (f, info) where info has the closedness residual and loop
    evaluations.  Raises NotExact when loop evaluations are non-zero beyond
    `TOL.quad`, BudgetExhausted when the reconstruction residual stays above
    tolerance (cannot happen for trig-poly input below the degree budget,
    but the check is kept honest).
    """
    if form.degree != 1:
        raise ValueError("primitive solve takes 1-forms")
    budget = RES.fourier_budget if budget is None else budget
    evals = loop_evaluations(form)
    closed_res = form.d().sup_norm()
    bad = {k: v for k, v in evals.items() if np.max(np.abs(v)) > TOL.quad}
    if bad:
        raise NotExact(evals)
    if form.base == "S1":
        prims = [p.periodic_primitive() for p in form.comps[0]]
        f = VForm.function("S1", prims)
    else:
        prims = []
        for p, q in zip(form.comps[0], form.comps[1]):
            prims.append(_torus_primitive(p, q))
        f = VForm.function("T2", prims)
    res = (f.d() - form).sup_norm()
    if res > TOL.quad:
        raise BudgetExhausted(
            f"primitive residual {res:.3e} at degree budget {budget}"
        )
    info = {"closedness": closed_res, "loop_evals": evals, "residual": res}
    return f, info


def _torus_primitive(p: TrigPoly2, q: TrigPoly2) -> TrigPoly2:
    """f with partial_x f = p, partial_y f = q (input closed, mean dropped)."""
    n1 = max(p.degrees[0], q.degrees[0])
    n2 = max(p.degrees[1], q.degrees[1])
    cp = p.padded((n1, n2)).c
    cq = q.padded((n1, n2)).c
    k1 = np.arange(-n1, n1 + 1)[:, None]
    k2 = np.arange(-n2, n2 + 1)[None, :]
    out = np.zeros_like(cp)
    with np.errstate(divide="ignore", invalid="ignore"):
        use_x = k1 != 0
        out = np.where(use_x, cp / (TWO_PI * 1j * np.where(use_x, k1, 1)), out)
        use_y = (k1 == 0) & (k2 != 0)
        out = np.where(use_y, cq / (TWO_PI * 1j * np.where(use_y, k2, 1)), out)
    out[n1, n2] = 0.0
    return TrigPoly2(out)


# ---------------------------------------------------------------------------
# random samplers (shared by property tests and the verification suites)
# ---------------------------------------------------------------------------

def random_trigpoly(rng: np.random.Generator, degree: int, scale: float = 0.1,
                    decay: float = 2.0) -> TrigPoly:
    """Random trig poly with coefficient k-th pair ~ U(-scale, scale) / k^decay.

    The decay keeps products/derivatives of sampled fields at O(1) so that
    absolute residual tolerances are meaningful.
    """
    k = np.arange(1, degree + 1, dtype=float)
    damp = 1.0 / np.maximum(k, 1.0) ** decay
    a = rng.uniform(-scale, scale, degree) * damp
    b = rng.uniform(-scale, scale, degree) * damp
    return TrigPoly(rng.uniform(-scale, scale), a, b)


def random_trigpoly2(rng: np.random.Generator, degrees, scale: float = 0.1,
                     decay: float = 2.0) -> TrigPoly2:
    n1, n2 = degrees
    k1 = np.abs(np.arange(-n1, n1 + 1))[:, None]
    k2 = np.abs(np.arange(-n2, n2 + 1))[None, :]
    damp = 1.0 / np.maximum(k1 + k2, 1.0) ** decay
    c = (rng.uniform(-scale, scale, (2 * n1 + 1, 2 * n2 + 1))
         + 1j * rng.uniform(-scale, scale, (2 * n1 + 1, 2 * n2 + 1))) * damp
    return TrigPoly2(c)  # constructor symmetrizes


def random_vector_field(rng: np.random.Generator, base: str, degree: int = 4,
                        scale: float = 0.1, decay: float = 2.0) -> VectorField:
    if base == "S1":
        return VectorField.on_circle(random_trigpoly(rng, degree, scale, decay))
    return VectorField.on_torus(
        random_trigpoly2(rng, (degree, degree), scale, decay),
        random_trigpoly2(rng, (degree, degree), scale, decay),
    )


# ---------------------------------------------------------------------------
# JSON helpers
# ---------------------------------------------------------------------------

def dumps(obj) -> str:
    return json.dumps(obj.to_dict(), indent=2, sort_keys=True)


def loads(text: str):
    d = json.loads(text)
    kind = d.get("type")
    if kind == "trigpoly":
        return TrigPoly.from_dict(d)
    if kind == "trigpoly2":
        return TrigPoly2.from_dict(d)
    if kind == "vform":
        return VForm.from_dict(d)
    raise ValueError(f"unknown payload type {kind!r}")
