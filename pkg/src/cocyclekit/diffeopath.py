"""Diffeomorphisms of S^1 and T^2, paths in diffeomorphism and linear groups,
and logarithmic derivatives.

Circle diffeomorphisms are stored through their lift phi(x) = x + p(x) with a
trig-polynomial displacement p (orientation preserving, phi' > 0 checked on a
dense grid); torus diffeomorphisms analogously with a doubly periodic
displacement pair.  Compositions and pullbacks leave the trig-poly class, so
they are re-projected onto the degree budgets in `config.Resolution`
(`circle_degree`, `torus_degree`); the sampling grids are oversampled above
Nyquist so the only error is genuine spectral truncation of rapidly decaying
tails, never aliasing of retained modes.

Paths are uniform time grids t_k = k/K from the identity.  Logarithmic
derivatives use 6th-order finite differences in t on the displacement
coefficients (7-point windows, clamped near the path ends; shorter paths
degrade gracefully to the window the nodes allow):

    right:  (delta^r phi_t)(y) = (d/dt phi_t)(phi_t^{-1}(y))
    left:   (delta^l phi_t)(x) = (D phi_t(x))^{-1} (d/dt phi_t)(x)

and for linear-group paths delta^r u = du/dt u^{-1}, delta^l u = u^{-1} du/dt.
Newton iteration inverts diffeomorphisms pointwise (the lift is strictly
monotone / has uniformly invertible Jacobian).
"""

from __future__ import annotations

import functools
import numpy as np
from scipy.linalg import expm

from .config import TOL, RES
from .trigcalc import (
    TrigPoly, TrigPoly2, VForm, VectorField, LinearMap,
    project_circle, project_torus, eval_torus_batch,
)

_NEWTON_TOL = 1e-13
_NEWTON_MAXIT = 60


# ---------------------------------------------------------------------------
# circle diffeomorphisms
# ---------------------------------------------------------------------------

class CircleDiffeo:
    """Orientation-preserving diffeomorphism of R/Z via its lift x + p(x)."""

    def __init__(self, displacement: TrigPoly, check: bool = True):
        self.p = displacement
        if check and self.p.degree:
            m = max(256, 4 * self.p.degree + 9)
            dp = self.p.derivative().sample(m)
            if np.min(1.0 + dp) <= TOL.mono:
                raise ValueError("lift is not strictly increasing (not a diffeomorphism)")

    @classmethod
    def identity(cls) -> "CircleDiffeo":
        return cls(TrigPoly.zero(), check=False)

    @classmethod
    def rotation(cls, s: float) -> "CircleDiffeo":
        return cls(TrigPoly.constant(s), check=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x + self.p(x)

    def deriv(self, x):
        return 1.0 + self.p.derivative()(np.asarray(x, dtype=float))

    def invert_points(self, y, x0=None):
        """Solve phi(x) = y; y in cover coordinates.

        Bisection-safeguarded Newton on the strictly increasing lift: the
        root lies in [y - max p, y - min p], Newton steps leaving the
        bracket fall back to bisection, so convergence is unconditional.
        `x0` warm-starts the iteration (e.g. the solution at a nearby
        path node).
        """
        y = np.asarray(y, dtype=float)
        if self.p.degree == 0:
            return y - self.p.a0
        samples = self.p.sample(max(64, 4 * self.p.degree + 9))
        slack = 1e-3 + float(np.sum(np.abs(self.p.derivative().a))
                             + np.sum(np.abs(self.p.derivative().b))) / max(
            64, 4 * self.p.degree + 9)
        lo = y - (np.max(samples) + slack)
        hi = y - (np.min(samples) - slack)
        dp = self.p.derivative()
        x = np.clip(y - self.p(y) if x0 is None else np.asarray(x0, dtype=float),
                    lo, hi)
        best = np.inf
        stall = 0
        for _ in range(_NEWTON_MAXIT):
            r = x + self.p(x) - y
            worst = np.max(np.abs(r))
            if worst < _NEWTON_TOL:
                return x
            # residuals at the evaluation noise floor stop improving; accept
            if worst < 0.5 * best:
                best, stall = worst, 0
            else:
                stall += 1
                if stall >= 4 and best < 1e-11:
                    break
            live = np.abs(r) >= _NEWTON_TOL  # freeze converged points
            hi = np.where(live & (r > 0), np.minimum(hi, x), hi)
            lo = np.where(live & (r < 0), np.maximum(lo, x), lo)
            trial = x - r / (1.0 + dp(x))
            bad = ~np.isfinite(trial) | (trial <= lo) | (trial >= hi)
            x = np.where(live, np.where(bad, 0.5 * (lo + hi), trial), x)
        r = x + self.p(x) - y
        if np.max(np.abs(r)) > 1e-9:
            raise RuntimeError("inversion failed to converge")
        return x

    def compose(self, other: "CircleDiffeo", degree: int | None = None) -> "CircleDiffeo":
        """self after other: x -> self(other(x)), displacement re-projected."""
        degree = RES.circle_degree if degree is None else degree
        m = RES.oversample * (2 * degree + 1)
        x = np.arange(m) / m
        mid = other(x)
        disp = other.p(x) + self.p(mid)
        return CircleDiffeo(project_circle(disp, degree).trimmed(1e-15))

    def inverse(self, degree: int | None = None) -> "CircleDiffeo":
        degree = RES.circle_degree if degree is None else degree
        m = RES.oversample * (2 * degree + 1)
        y = np.arange(m) / m
        x = self.invert_points(y)
        return CircleDiffeo(project_circle(x - y, degree).trimmed(1e-15))

    def distance_to(self, other: "CircleDiffeo") -> float:
        return (self.p - other.p).sup_norm()

    def to_dict(self) -> dict:
        return {"type": "circle-diffeo", "p": self.p.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "CircleDiffeo":
        if d.get("type") != "circle-diffeo":
            raise ValueError("not a circle-diffeo payload")
        return cls(TrigPoly.from_dict(d["p"]))

    def __repr__(self):
        return f"CircleDiffeo(degree={self.p.degree})"


# ---------------------------------------------------------------------------
# torus diffeomorphisms
# ---------------------------------------------------------------------------

class TorusDiffeo:
    """Diffeomorphism of T^2 isotopic to the identity, lift x -> x + P(x)."""

    def __init__(self, disp_x: TrigPoly2, disp_y: TrigPoly2, check: bool = True):
        self.px = disp_x
        self.py = disp_y
        if check and (max(disp_x.degrees) or max(disp_y.degrees)):
            det = self.det_jacobian_poly()
            n = max(max(det.degrees), 8)
            g = 4 * n + 5
            if np.min(det.sample(g, g)) <= TOL.mono:
                raise ValueError("Jacobian determinant not bounded below (not a diffeomorphism)")

    def det_jacobian_poly(self) -> TrigPoly2:
        """det D(phi) as an exact trig polynomial."""
        return ((self.px.partial(0) + 1.0) * (self.py.partial(1) + 1.0)
                - self.px.partial(1) * self.py.partial(0))

    @classmethod
    def identity(cls) -> "TorusDiffeo":
        return cls(TrigPoly2.zero(), TrigPoly2.zero(), check=False)

    @classmethod
    def translation(cls, v) -> "TorusDiffeo":
        v = np.asarray(v, dtype=float).reshape(2)
        return cls(TrigPoly2.constant(v[0]), TrigPoly2.constant(v[1]), check=False)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.array([x + self.px(x, y), y + self.py(x, y)])

    def jacobian(self, x, y) -> np.ndarray:
        """J[i, j] at the given points, shape (2, 2) + pts."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.array([
            [1.0 + self.px.partial(0)(x, y), self.px.partial(1)(x, y)],
            [self.py.partial(0)(x, y), 1.0 + self.py.partial(1)(x, y)],
        ])

    def invert_points(self, xt, yt, p0=None):
        """Solve phi(x, y) = (xt, yt) by Newton with backtracking damping.

        The full step is halved (up to 8 times, per point) until the
        residual actually drops, which rides out the strong-compression
        regions where an undamped step overshoots.  `p0 = (x0, y0)`
        warm-starts the iteration.
        """
        xt = np.asarray(xt, dtype=float)
        yt = np.asarray(yt, dtype=float)
        polys = self._newton_polys()
        if p0 is None:
            pxv, pyv = eval_torus_batch(polys[:2], xt, yt)
            x = xt - pxv
            y = yt - pyv
        else:
            x = np.asarray(p0[0], dtype=float).copy()
            y = np.asarray(p0[1], dtype=float).copy()
        pxv, pyv, dxx, dxy, dyx, dyy = eval_torus_batch(polys, x, y)
        rx = x + pxv - xt
        ry = y + pyv - yt
        best = np.inf
        stall = 0
        for _ in range(_NEWTON_MAXIT):
            rnorm = np.hypot(rx, ry)
            worst = np.max(rnorm)
            if worst < _NEWTON_TOL:
                return x, y
            if worst < 0.5 * best:
                best, stall = worst, 0
            else:
                stall += 1
                if stall >= 4 and best < 1e-11:
                    break
            live = rnorm >= _NEWTON_TOL  # freeze converged points
            j11, j12, j21, j22 = 1.0 + dxx, dxy, dyx, 1.0 + dyy
            det = j11 * j22 - j12 * j21
            sx = np.where(live, (j22 * rx - j12 * ry) / det, 0.0)
            sy = np.where(live, (-j21 * rx + j11 * ry) / det, 0.0)
            lam = np.ones_like(rnorm)
            for _bt in range(8):
                xn = x - lam * sx
                yn = y - lam * sy
                pxv, pyv, dxx, dxy, dyx, dyy = eval_torus_batch(polys, xn, yn)
                rxn = xn + pxv - xt
                ryn = yn + pyv - yt
                worse = live & (np.hypot(rxn, ryn) > rnorm)
                if not np.any(worse):
                    break
                lam = np.where(worse, 0.5 * lam, lam)
            x, y, rx, ry = xn, yn, rxn, ryn
        if np.max(np.hypot(rx, ry)) > 1e-9:
            raise RuntimeError("inversion failed to converge")
        return x, y

    def _newton_polys(self):
        """(px, py, and the four displacement partials), cached."""
        cached = getattr(self, "_np_cache", None)
        if cached is None:
            cached = (self.px, self.py,
                      self.px.partial(0), self.px.partial(1),
                      self.py.partial(0), self.py.partial(1))
            self._np_cache = cached
        return cached

    def compose(self, other: "TorusDiffeo", degree: int | None = None) -> "TorusDiffeo":
        degree = RES.torus_degree if degree is None else degree
        g = RES.oversample * (2 * degree + 1)
        xs = np.arange(g) / g
        xx = np.repeat(xs, g).reshape(g, g)
        yy = np.tile(xs, g).reshape(g, g)
        mx, my = other(xx, yy)
        dx = other.px(xx, yy) + self.px(mx, my)
        dy = other.py(xx, yy) + self.py(mx, my)
        return TorusDiffeo(
            project_torus(dx, (degree, degree)).trimmed(1e-15),
            project_torus(dy, (degree, degree)).trimmed(1e-15),
        )

    def inverse(self, degree: int | None = None) -> "TorusDiffeo":
        degree = RES.torus_degree if degree is None else degree
        g = RES.oversample * (2 * degree + 1)
        xs = np.arange(g) / g
        xx = np.repeat(xs, g).reshape(g, g)
        yy = np.tile(xs, g).reshape(g, g)
        ix, iy = self.invert_points(xx, yy)
        return TorusDiffeo(
            project_torus(ix - xx, (degree, degree)).trimmed(1e-15),
            project_torus(iy - yy, (degree, degree)).trimmed(1e-15),
        )

    def distance_to(self, other: "TorusDiffeo") -> float:
        return max((self.px - other.px).sup_norm(), (self.py - other.py).sup_norm())

    def to_dict(self) -> dict:
        return {"type": "torus-diffeo",
                "px": self.px.to_dict(), "py": self.py.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "TorusDiffeo":
        if d.get("type") != "torus-diffeo":
            raise ValueError("not a torus-diffeo payload")
        return cls(TrigPoly2.from_dict(d["px"]), TrigPoly2.from_dict(d["py"]))

    def __repr__(self):
        return f"TorusDiffeo(degrees={self.px.degrees}, {self.py.degrees})"


def compose(f, g, degree: int | None = None):
    """f after g for either diffeomorphism type."""
    return f.compose(g, degree=degree)


# ---------------------------------------------------------------------------
# pullbacks and pushforwards
# ---------------------------------------------------------------------------

def compose_scalar(f, phi, degree: int | None = None):
    """f o phi for a scalar trig poly and a diffeomorphism (projected)."""
    if isinstance(f, TrigPoly):
        degree = RES.circle_degree if degree is None else degree
        m = RES.oversample * (2 * degree + 1)
        x = np.arange(m) / m
        return project_circle(f(phi(x)), degree).trimmed(1e-15)
    degree = RES.torus_degree if degree is None else degree
    g = RES.oversample * (2 * degree + 1)
    xs = np.arange(g) / g
    xx = np.repeat(xs, g).reshape(g, g)
    yy = np.tile(xs, g).reshape(g, g)
    mx, my = phi(xx, yy)
    return project_torus(f(mx, my), (degree, degree)).trimmed(1e-15)


def pullback(form: VForm, phi, degree: int | None = None) -> VForm:
    """phi^* form, re-projected onto the degree budget."""
    if form.base == "S1":
        degree = RES.circle_degree if degree is None else degree
        m = RES.oversample * (2 * degree + 1)
        x = np.arange(m) / m
        if form.degree == 0:
            comps = [[project_circle(p(phi(x)), degree) for p in form.comps[0]]]
            return VForm("S1", 0, comps)
        if form.degree == 1:
            dphi = phi.deriv(x)
            comps = [[project_circle(p(phi(x)) * dphi, degree) for p in form.comps[0]]]
            return VForm("S1", 1, comps)
        return VForm.zero("S1", 2, form.vdim)
    degree = RES.torus_degree if degree is None else degree
    g = RES.oversample * (2 * degree + 1)
    xs = np.arange(g) / g
    xx = np.repeat(xs, g).reshape(g, g)
    yy = np.tile(xs, g).reshape(g, g)
    mx, my = phi(xx, yy)
    jac = phi.jacobian(xx, yy)
    dd = (degree, degree)
    if form.degree == 0:
        return VForm("T2", 0, [[project_torus(p(mx, my), dd) for p in form.comps[0]]])
    if form.degree == 1:
        dx_row, dy_row = [], []
        for p, q in zip(form.comps[0], form.comps[1]):
            pv, qv = p(mx, my), q(mx, my)
            dx_row.append(project_torus(pv * jac[0, 0] + qv * jac[1, 0], dd))
            dy_row.append(project_torus(pv * jac[0, 1] + qv * jac[1, 1], dd))
        return VForm("T2", 1, [dx_row, dy_row])
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    return VForm("T2", 2, [[project_torus(p(mx, my) * det, dd) for p in form.comps[0]]])


def pushforward_field(phi, x_field: VectorField, degree: int | None = None) -> VectorField:
    """Ad(phi) X = phi_* X = (D phi . X) o phi^{-1} (used by Leibniz checks)."""
    if x_field.base == "S1":
        degree = RES.circle_degree if degree is None else degree
        m = RES.oversample * (2 * degree + 1)
        y = np.arange(m) / m
        x = phi.invert_points(y)
        vals = phi.deriv(x) * x_field.comps[0](x)
        return VectorField.on_circle(project_circle(vals, degree).trimmed(1e-15))
    degree = RES.torus_degree if degree is None else degree
    g = RES.oversample * (2 * degree + 1)
    xs = np.arange(g) / g
    xx = np.repeat(xs, g).reshape(g, g)
    yy = np.tile(xs, g).reshape(g, g)
    ix, iy = phi.invert_points(xx, yy)
    jac = phi.jacobian(ix, iy)
    v1 = x_field.comps[0](ix, iy)
    v2 = x_field.comps[1](ix, iy)
    dd = (degree, degree)
    return VectorField.on_torus(
        project_torus(jac[0, 0] * v1 + jac[0, 1] * v2, dd).trimmed(1e-15),
        project_torus(jac[1, 0] * v1 + jac[1, 1] * v2, dd).trimmed(1e-15),
    )


def equivariance_residual(phi, u: LinearMap, omega: VForm) -> float:
    """sup | phi^* omega - u . omega | (how far (phi, u) is from the
    omega-equivariant group)."""
    return (pullback(omega, phi) - omega.map_values(u)).sup_norm()


def infinitesimal_equivariance_residual(eta: VectorField, gamma: LinearMap,
                                        omega: VForm) -> float:
    """sup | L_eta omega - gamma . omega |."""
    return (omega.lie(eta) - omega.map_values(gamma)).sup_norm()


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _fd_weights(k: int, n: int):
    """First-derivative stencil at node k of an n-node uniform grid.

    Seven-point window (shorter near-minimal grids), clamped at the ends,
    weights solved from the Vandermonde moment conditions; order is
    window-1, i.e. 6th order once n >= 7.  f'_k ≈ Σ_j w_j f_{k+o_j} / h.
    """
    win = min(n, 7)
    if win < 3:
        raise ValueError("need at least 3 nodes for the fd stencils")
    start = min(max(k - (win - 1) // 2, 0), n - win)
    offs = tuple(range(start - k, start - k + win))
    a = np.vander(np.array(offs, dtype=float), increasing=True).T
    rhs = np.zeros(win)
    rhs[1] = 1.0
    w = np.linalg.solve(a, rhs)
    # snap the lowest two moments so constants differentiate to exactly 0
    w -= np.sum(w) / win
    w /= np.dot(w, offs)
    return offs, tuple(w)


def _fd_derivative(nodes, h: float):
    """Nodewise d/dt of a sequence of linear-space elements (TrigPoly,
    TrigPoly2, ndarray...) on a uniform grid.

    Accumulates w_j (f_{k+j} - f_k), not w_j f_{k+j}: the weights sum to
    zero analytically, and the difference form keeps that exact in floats
    (a constant path differentiates to exactly zero) while avoiding the
    large cancellation of the raw form.
    """
    n = len(nodes)
    out = []
    for k in range(n):
        offs, w = _fd_weights(k, n)
        acc = None
        for o, c in zip(offs, w):
            if o == 0:
                continue
            term = (nodes[k + o] - nodes[k]) * (c / h)
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


class DiffeoPath:
    """Path t_k = k/K in Diff(S^1) or Diff(T^2), starting at the identity."""

    def __init__(self, nodes, base: str):
        self.nodes = list(nodes)
        self.base = base
        if len(self.nodes) < 2:
            raise ValueError("path needs at least two nodes")

    @property
    def steps(self) -> int:
        return len(self.nodes) - 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, len(self.nodes))

    def endpoint(self):
        return self.nodes[-1]

    def is_loop(self, tol: float | None = None) -> bool:
        """Endpoint within `tol` of the identity (displacement sup norm)."""
        tol = 10.0 * TOL.ode if tol is None else tol
        ident = CircleDiffeo.identity() if self.base == "S1" else TorusDiffeo.identity()
        return self.endpoint().distance_to(ident) < tol

    def to_dict(self) -> dict:
        return {"type": "diffeo-path", "base": self.base,
                "grid": [float(t) for t in self.times],
                "nodes": [n.to_dict() for n in self.nodes]}

    @classmethod
    def from_dict(cls, d: dict) -> "DiffeoPath":
        if d.get("type") != "diffeo-path":
            raise ValueError("not a diffeo-path payload")
        node_cls = CircleDiffeo if d["base"] == "S1" else TorusDiffeo
        return cls([node_cls.from_dict(nd) for nd in d["nodes"]], d["base"])

    def _displacements(self):
        if self.base == "S1":
            return [n.p for n in self.nodes]
        return [(n.px, n.py) for n in self.nodes]

    def velocity_polys(self):
        """d/dt of the displacement at each node (trig polys; exact spatial
        content, 4th-order in t)."""
        h = 1.0 / self.steps
        if self.base == "S1":
            return _fd_derivative([n.p for n in self.nodes], h)
        vx = _fd_derivative([n.px for n in self.nodes], h)
        vy = _fd_derivative([n.py for n in self.nodes], h)
        return list(zip(vx, vy))

    def log_derivative(self, side: str = "right", degree: int | None = None):
        """delta^r or delta^l at every node, as VectorFields."""
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        vels = self.velocity_polys()
        out = []
        if self.base == "S1":
            degree = RES.circle_degree if degree is None else degree
            m = RES.oversample * (2 * degree + 1)
            grid = np.arange(m) / m
            warm = grid
            for node, vel in zip(self.nodes, vels):
                if side == "left":
                    vals = vel(grid) / node.deriv(grid)
                else:
                    warm = node.invert_points(grid, x0=warm)
                    vals = vel(warm)
                out.append(VectorField.on_circle(
                    project_circle(vals, degree).trimmed(1e-15)))
            return out
        degree = RES.torus_degree if degree is None else degree
        g = RES.oversample * (2 * degree + 1)
        xs = np.arange(g) / g
        xx = np.repeat(xs, g).reshape(g, g)
        yy = np.tile(xs, g).reshape(g, g)
        dd = (degree, degree)
        warm = (xx, yy)
        for node, (vx, vy) in zip(self.nodes, vels):
            if side == "left":
                jac = node.jacobian(xx, yy)
                det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
                wx = vx(xx, yy)
                wy = vy(xx, yy)
                ux = (jac[1, 1] * wx - jac[0, 1] * wy) / det
                uy = (-jac[1, 0] * wx + jac[0, 0] * wy) / det
            else:
                warm = node.invert_points(xx, yy, p0=warm)
                ux = vx(*warm)
                uy = vy(*warm)
            out.append(VectorField.on_torus(
                project_torus(ux, dd).trimmed(1e-15),
                project_torus(uy, dd).trimmed(1e-15)))
        return out

    def reversed(self) -> "DiffeoPath":
        """Path t -> phi_{1-t} o phi_1^{-1}, from the identity to phi_1^{-1}."""
        inv = self.nodes[-1].inverse()
        return DiffeoPath([n.compose(inv) for n in self.nodes[::-1]], self.base)

    def concatenate(self, other: "DiffeoPath") -> "DiffeoPath":
        """First run self (double speed), then endpoint(self) o other; node
        counts must match and be even."""
        if self.base != other.base or self.steps != other.steps:
            raise ValueError("concatenation needs matching bases and node counts")
        if self.steps % 2:
            raise ValueError("concatenation needs an even step count")
        k = self.steps
        first = [self.nodes[2 * i] for i in range(k // 2 + 1)]
        end = self.endpoint()
        second = [end.compose(other.nodes[2 * i - k]) for i in range(k // 2 + 1, k + 1)]
        return DiffeoPath(first + second, self.base)


class GLPath:
    """Path in GL(V) on the uniform grid, starting at the identity."""

    def __init__(self, matrices):
        self.mats = [np.atleast_2d(np.asarray(m, dtype=float)) for m in matrices]
        if len(self.mats) < 2:
            raise ValueError("path needs at least two nodes")
        for m in self.mats:
            if abs(np.linalg.det(m)) <= TOL.inv:
                raise ValueError("path leaves GL(V): |det| below tolerance")

    @classmethod
    def constant_identity(cls, n: int, steps: int) -> "GLPath":
        return cls([np.eye(n)] * (steps + 1))

    @classmethod
    def from_callable(cls, fn, steps: int) -> "GLPath":
        return cls([fn(t) for t in np.linspace(0.0, 1.0, steps + 1)])

    @classmethod
    def from_generator(cls, a: np.ndarray, steps: int) -> "GLPath":
        a = np.asarray(a, dtype=float)
        return cls.from_callable(lambda t: expm(t * a), steps)

    @property
    def steps(self) -> int:
        return len(self.mats) - 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, len(self.mats))

    def endpoint(self) -> np.ndarray:
        return self.mats[-1]

    def node(self, k: int) -> LinearMap:
        return LinearMap(self.mats[k])

    def log_derivative(self, side: str = "right"):
        """List of matrices delta^r u = u' u^{-1} or delta^l u = u^{-1} u'."""
        h = 1.0 / self.steps
        dots = _fd_derivative(self.mats, h)
        out = []
        for u, du in zip(self.mats, dots):
            ui = np.linalg.inv(u)
            out.append(du @ ui if side == "right" else ui @ du)
        return out

    def reversed(self) -> "GLPath":
        inv = np.linalg.inv(self.mats[-1])
        return GLPath([m @ inv for m in self.mats[::-1]])

    def to_dict(self) -> dict:
        return {"type": "gl-path",
                "grid": [float(t) for t in self.times],
                "nodes": [m.tolist() for m in self.mats]}

    @classmethod
    def from_dict(cls, d: dict) -> "GLPath":
        if d.get("type") != "gl-path":
            raise ValueError("not a gl-path payload")
        return cls([np.asarray(m, dtype=float) for m in d["nodes"]])

    def concatenate(self, other: "GLPath") -> "GLPath":
        if self.steps != other.steps or self.steps % 2:
            raise ValueError("concatenation needs matching, even node counts")
        k = self.steps
        first = [self.mats[2 * i] for i in range(k // 2 + 1)]
        end = self.mats[-1]
        second = [end @ other.mats[2 * i - k] for i in range(k // 2 + 1, k + 1)]
        return GLPath(first + second)


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------

def flow(field_at, steps: int, base: str = "S1",
         degree: int | None = None, tail_tol: float = 2.5e-8) -> DiffeoPath:
    """Integrate the time-dependent field t -> VectorField from the identity.

    `field_at` is a callable t -> VectorField (pass `lambda t: X` for an
    autonomous field).  One RK4 step per node interval on the characteristic
    positions of an oversampled spatial grid; each node map is projected back
    onto the degree budget.

    Two refusal modes, both raising ValueError rather than returning silently
    degraded nodes: projection may break strict monotonicity, and the
    projection's dropped spectral tail (l1 mass of the discarded modes, a sup
    bound on the pointwise error of the kept map) may exceed `tail_tol`.
    `flow_map_points` handles fields past the degree budget.
    """
    if steps < 4:
        raise ValueError("need at least 4 steps")
    h = 1.0 / steps
    if base == "S1":
        degree = RES.circle_degree if degree is None else degree
        m = RES.oversample * (2 * degree + 1)
        x0 = np.arange(m) / m
        x = x0.copy()
        nodes = [CircleDiffeo.identity()]
        for k in range(steps):
            t = k * h
            f1 = field_at(t).comps[0]
            f2 = field_at(t + 0.5 * h).comps[0]
            f4 = field_at(t + h).comps[0]
            k1 = f1(x)
            k2 = f2(x + 0.5 * h * k1)
            k3 = f2(x + 0.5 * h * k2)
            k4 = f4(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            spec = np.fft.rfft(x - x0)
            tail = 2.0 * np.sum(np.abs(spec[degree + 1:])) / m
            if tail > tail_tol:
                raise ValueError(
                    f"dropped spectral tail {tail:.2e} at t={t + h:.4f}: field "
                    f"too large for the degree budget / step count")
            try:
                nodes.append(CircleDiffeo(
                    project_circle(x - x0, degree).trimmed(1e-15)))
            except ValueError as exc:
                raise ValueError(
                    f"monotonicity lost at t={t + h:.4f}: field too large for "
                    f"the degree budget / step count ({exc})") from exc
        return DiffeoPath(nodes, "S1")
    degree = RES.torus_degree if degree is None else degree
    g = RES.oversample * (2 * degree + 1)
    xs = np.arange(g) / g
    xx0 = np.repeat(xs, g).reshape(g, g)
    yy0 = np.tile(xs, g).reshape(g, g)
    xx, yy = xx0.copy(), yy0.copy()
    dd = (degree, degree)
    freqs = np.fft.fftfreq(g, d=1.0 / g).astype(int)
    dropped = (np.abs(freqs)[:, None] > degree) | (np.abs(freqs)[None, :] > degree)
    nodes = [TorusDiffeo.identity()]
    for k in range(steps):
        t = k * h
        fa, fb, fc = field_at(t), field_at(t + 0.5 * h), field_at(t + h)
        k1x, k1y = fa.comps[0](xx, yy), fa.comps[1](xx, yy)
        k2x, k2y = (fb.comps[0](xx + 0.5 * h * k1x, yy + 0.5 * h * k1y),
                    fb.comps[1](xx + 0.5 * h * k1x, yy + 0.5 * h * k1y))
        k3x, k3y = (fb.comps[0](xx + 0.5 * h * k2x, yy + 0.5 * h * k2y),
                    fb.comps[1](xx + 0.5 * h * k2x, yy + 0.5 * h * k2y))
        k4x, k4y = (fc.comps[0](xx + h * k3x, yy + h * k3y),
                    fc.comps[1](xx + h * k3x, yy + h * k3y))
        xx = xx + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        yy = yy + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
        tail = max(
            float(np.sum(np.abs(np.fft.fft2(xx - xx0)[dropped]))),
            float(np.sum(np.abs(np.fft.fft2(yy - yy0)[dropped])))) / g ** 2
        if tail > tail_tol:
            raise ValueError(
                f"dropped spectral tail {tail:.2e} at t={t + h:.4f}: field "
                f"too large for the degree budget / step count")
        try:
            nodes.append(TorusDiffeo(
                project_torus(xx - xx0, dd).trimmed(1e-15),
                project_torus(yy - yy0, dd).trimmed(1e-15)))
        except ValueError as exc:
            raise ValueError(
                f"monotonicity lost at t={t + h:.4f}: field too large for "
                f"the degree budget / step count ({exc})") from exc
    return DiffeoPath(nodes, base="T2")


def flow_map_points(field_at, points, steps: int, base: str = "S1",
                    t_final: float = 1.0):
    """Characteristics through specific points (no spatial projection).

    Complements `flow`: a DiffeoPath's trig-poly nodes are only as good as
    the degree budget, which strongly expanding maps exceed; this evaluates
    phi_{t_final} at the given cover coordinates with pure RK4 accuracy.
    Returns an array shaped like `points` (S^1) or a pair of arrays (T^2).
    """
    h = t_final / steps
    if base == "S1":
        x = np.asarray(points, dtype=float).copy()
        for k in range(steps):
            t = k * h
            f1 = field_at(t).comps[0]
            f2 = field_at(t + 0.5 * h).comps[0]
            f4 = field_at(t + h).comps[0]
            k1 = f1(x)
            k2 = f2(x + 0.5 * h * k1)
            k3 = f2(x + 0.5 * h * k2)
            k4 = f4(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return x
    x = np.asarray(points[0], dtype=float).copy()
    y = np.asarray(points[1], dtype=float).copy()
    for k in range(steps):
        t = k * h
        fa, fb, fc = field_at(t), field_at(t + 0.5 * h), field_at(t + h)
        k1x, k1y = fa.comps[0](x, y), fa.comps[1](x, y)
        k2x = fb.comps[0](x + 0.5 * h * k1x, y + 0.5 * h * k1y)
        k2y = fb.comps[1](x + 0.5 * h * k1x, y + 0.5 * h * k1y)
        k3x = fb.comps[0](x + 0.5 * h * k2x, y + 0.5 * h * k2y)
        k3y = fb.comps[1](x + 0.5 * h * k2x, y + 0.5 * h * k2y)
        k4x = fc.comps[0](x + h * k3x, y + h * k3y)
        k4y = fc.comps[1](x + h * k3x, y + h * k3y)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        y = y + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
    return x, y


# ---------------------------------------------------------------------------
# structural identity checks
# ---------------------------------------------------------------------------

def leibniz_check(path1, path2) -> float:
    """Max nodewise residual of delta^r(g1 g2) = delta^r g1 + Ad(g1) delta^r g2.

    Works for two DiffeoPaths (same base, same grid) or two GLPaths.
    """
    if isinstance(path1, GLPath):
        if path1.steps != path2.steps:
            raise ValueError("paths need matching grids")
        prod = GLPath([a @ b for a, b in zip(path1.mats, path2.mats)])
        d_prod = prod.log_derivative("right")
        d1 = path1.log_derivative("right")
        d2 = path2.log_derivative("right")
        worst = 0.0
        for u1, a, b, c in zip(path1.mats, d_prod, d1, d2):
            rhs = b + u1 @ c @ np.linalg.inv(u1)
            worst = max(worst, float(np.max(np.abs(a - rhs))))
        return worst
    if path1.base != path2.base or path1.steps != path2.steps:
        raise ValueError("paths need matching bases and grids")
    prod = DiffeoPath(
        [a.compose(b) for a, b in zip(path1.nodes, path2.nodes)], path1.base)
    d_prod = prod.log_derivative("right")
    d1 = path1.log_derivative("right")
    d2 = path2.log_derivative("right")
    worst = 0.0
    for n1, a, b, c in zip(path1.nodes, d_prod, d1, d2):
        rhs = b + pushforward_field(n1, c)
        worst = max(worst, (a - rhs).sup_norm())
    return worst


def maurer_cartan_check(h) -> float:
    """Flatness of the pulled-back Maurer-Cartan form.

    Two input shapes:

    * a map into an abelian vector group given as a 0-degree VForm family:
      delta^l h = dh, and the residual is |d(delta^l h)| = |ddh| (exact
      coefficient arithmetic; returns that sup norm).

    * a two-parameter family of invertible matrices, given as a callable
      h(t, s) -> ndarray: with xi = (d_t h) h^{-1} and eta = (d_s h) h^{-1}
      the residual of d_t eta - d_s xi = [xi, eta] is measured on a 17x17
      parameter grid with the module's finite-difference stencils.
    """
    if isinstance(h, VForm):
        if h.degree != 0:
            raise ValueError("abelian check expects a 0-form (a map to R^n)")
        return h.d().d().sup_norm()
    n = 17
    ts = np.linspace(0.0, 1.0, n)
    step = ts[1] - ts[0]
    mats = np.array([[h(t, s) for s in ts] for t in ts])  # (n, n, d, d)
    inv = np.linalg.inv(mats)

    def dt(arr):
        out = np.zeros_like(arr)
        for k in range(n):
            offs, w = _fd_weights(k, n)
            out[k] = sum((arr[k + o] - arr[k]) * (c / step)
                         for o, c in zip(offs, w) if o)
        return out

    d_t = dt(mats)
    d_s = np.swapaxes(dt(np.swapaxes(mats, 0, 1)), 0, 1)
    xi = np.einsum("tsij,tsjk->tsik", d_t, inv)
    eta = np.einsum("tsij,tsjk->tsik", d_s, inv)
    dt_eta = dt(eta)
    ds_xi = np.swapaxes(dt(np.swapaxes(xi, 0, 1)), 0, 1)
    bracket = (np.einsum("tsij,tsjk->tsik", xi, eta)
               - np.einsum("tsij,tsjk->tsik", eta, xi))
    res = dt_eta - ds_xi - bracket
    return float(np.max(np.abs(res)))
