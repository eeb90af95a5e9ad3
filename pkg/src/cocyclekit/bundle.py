"""Principal A-bundles over S¹ and T² in explicit charts.

A = V/Γ for a lattice Γ ⊂ V = ℝⁿ.  Two chart modes:

* trivial —  P = M × V with connection θ = q*α + dw for a 1-form α on M,
  so the curvature is ω = dα;
* magnetic — T² only.  P is glued from the ℝ² covering chart with gauge
  potential A = (R₀·x) dy + Ã, where R₀ = ∫_{T²} ω and Ã is the mean-zero
  Coulomb primitive of the flux-free part ω − R₀ dx∧dy.  Crossing x → x+1
  shifts the fiber by ψ₁(y) = −R₀·y, crossing y → y+1 is free; the two
  crossings commute only up to R₀ ∈ Γ, which is exactly why Γ must contain
  the period vector.

In every chart dθ = q*ω and i_{ρ̇(v)}θ = v.  Fiber coordinates live in V
(the covering of A); holonomy values are reduced mod Γ only when reported.
Parallel transport integrates w' = −A(ċ), so around a positively oriented
contractible loop the fiber shifts by −∫_Σ ω: the global holonomy sign is
s = −1, and everything downstream calibrates against that.
"""

from __future__ import annotations

import itertools

import numpy as np

from .config import RES, TOL
from .trigcalc import (
    Curve, LinearMap, TrigPoly, TrigPoly2, VForm, VectorField, cone_chain,
    integrate_over_chain, loop_evaluations, polyline_loop,
    primitive_of_closed_1form, project_torus, trig_curve,
)

TWO_PI = 2.0 * np.pi

_DIMS = {"S1": 1, "T2": 2}


# ---------------------------------------------------------------------------
# lattices and the quotient group A = V/Γ
# ---------------------------------------------------------------------------

class NonDiscrete(Exception):
    """The integer span of the generators accumulates at 0 (or cannot be
    separated from doing so at the certificate resolution TOL.disc)."""

    def __init__(self, msg: str, norm: float | None = None):
        self.norm = norm
        super().__init__(msg)


class LatticeGroup:
    """Γ = ℤ-span of generator vectors in V = ℝⁿ.

    The constructor runs a pairwise Euclidean/Lagrange reduction sweep and
    certifies discreteness: generators below TOL.disc are treated as zero on
    input, reduction residuals at float-noise level (relative 1e-10) are
    treated as exact integer relations, and anything that lands in between
    raises NonDiscrete — the span may be dense, and at this resolution we
    cannot tell.

    reduce() maps v ∈ V to its representative nearest 0 (Babai rounding plus
    a ±1 coefficient search, exact for the rank ≤ 2 lattices that occur
    here); exp() is the same map read as the quotient V → A in coordinates.
    """

    def __init__(self, generators, n: int | None = None):
        gens = [np.atleast_1d(np.asarray(g, dtype=float)) for g in generators]
        if gens:
            sizes = {g.size for g in gens}
            if len(sizes) != 1:
                raise ValueError("generators have mixed dimensions")
            dim = sizes.pop()
            if n is not None and n != dim:
                raise ValueError("explicit n contradicts the generators")
        else:
            if n is None:
                raise ValueError("empty generator list needs an explicit n")
            dim = n
        if not 1 <= dim <= 4:
            raise ValueError("value dimension must be 1..4")
        self.n = dim
        basis = self._reduce([g for g in gens if np.linalg.norm(g) > TOL.disc])
        if basis.size == 0:
            basis = np.zeros((0, dim))
        self.basis = basis  # (rank, n), rows are the reduced generators
        self.min_norm = (
            float(min(np.linalg.norm(b) for b in basis)) if len(basis) else np.inf
        )

    # -- reduction sweep (the discreteness certificate) -----------------------

    @staticmethod
    def _reduce(gens) -> np.ndarray:
        if not gens:
            return np.zeros((0, 0))
        scale = max(np.linalg.norm(g) for g in gens)
        floor = 1e-10 * scale
        work = [g.copy() for g in gens]
        for _ in range(10_000):
            work.sort(key=np.linalg.norm, reverse=True)
            changed = False
            for i in range(len(work)):
                for j in range(len(work)):
                    if i == j:
                        continue
                    denom = float(work[j] @ work[j])
                    if denom == 0.0:
                        continue
                    mu = np.round(float(work[i] @ work[j]) / denom)
                    if mu != 0.0:
                        work[i] = work[i] - mu * work[j]
                        changed = True
            kept = []
            for g in work:
                r = np.linalg.norm(g)
                if r <= floor:
                    continue  # exact integer relation, numerically zero
                if r <= TOL.disc:
                    raise NonDiscrete(
                        f"reduction produced a vector of norm {r:.3e}, between "
                        f"the noise floor {floor:.1e} and the certificate "
                        f"resolution {TOL.disc:.1e}: the span may be dense",
                        norm=float(r),
                    )
                kept.append(g)
            work = kept
            if not changed:
                break
        else:
            raise NonDiscrete("reduction sweep did not stabilize")
        basis = np.array(work) if work else np.zeros((0, gens[0].size))
        if len(basis) and np.linalg.matrix_rank(basis, tol=floor) < len(basis):
            raise NonDiscrete("reduced generators are linearly dependent")
        return basis

    # -- quotient arithmetic ---------------------------------------------------

    @property
    def rank(self) -> int:
        return len(self.basis)

    def reduce(self, v) -> np.ndarray:
        """Representative of v mod Γ nearest the origin."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if v.size != self.n:
            raise ValueError("vector dimension does not match the lattice")
        if self.rank == 0:
            return v.copy()
        coords, *_ = np.linalg.lstsq(self.basis.T, v, rcond=None)
        best, best_norm = None, np.inf
        for offs in itertools.product((-1.0, 0.0, 1.0), repeat=self.rank):
            c = np.round(coords) + np.array(offs)
            r = v - self.basis.T @ c
            rn = float(np.linalg.norm(r))
            if rn < best_norm:
                best, best_norm = r, rn
        return best

    exp = reduce  # the quotient map V -> A, in fundamental-domain coordinates

    def distance(self, v) -> float:
        """Distance from v to the nearest lattice point."""
        return float(np.linalg.norm(self.reduce(v)))

    def contains(self, v, tol: float | None = None) -> bool:
        return self.distance(v) <= (TOL.disc if tol is None else tol)

    def same_value(self, v1, v2, tol: float | None = None) -> bool:
        """Whether v1 and v2 name the same element of A = V/Γ."""
        return self.contains(np.asarray(v1, float) - np.asarray(v2, float), tol)

    def to_dict(self) -> dict:
        return {"n": self.n, "generators": [list(map(float, b)) for b in self.basis]}

    @classmethod
    def from_dict(cls, d: dict) -> "LatticeGroup":
        return cls(d.get("generators", []), n=int(d["n"]))

    def __repr__(self):
        return f"LatticeGroup(rank={self.rank}, n={self.n})"


def period_group(omega: VForm) -> LatticeGroup:
    """Γ = image of H₂(M,ℝ) → V under integration of ω.

    S¹ has no 2-cycles, so Γ = {0}.  On T² the fundamental class generates
    H₂, so Γ = ℤ·∫_{T²} ω — a single generator, dropped when the form is
    exact (integral at quadrature noise).
    """
    if omega.degree != 2:
        raise ValueError("period group takes a 2-form")
    if omega.d().sup_norm() > TOL.coeff:
        raise ValueError("2-form is not closed")
    if omega.base == "S1":
        return LatticeGroup([], n=omega.vdim)
    return LatticeGroup([omega.full_period_integral()], n=omega.vdim)


# ---------------------------------------------------------------------------
# functions on the covering space
# ---------------------------------------------------------------------------

def _scalar_zero(base: str):
    return TrigPoly.zero() if base == "S1" else TrigPoly2.zero()


def _scalar_partial(scalar, axis: int):
    return scalar.derivative() if isinstance(scalar, TrigPoly) else scalar.partial(axis)


class CoverFunction:
    """V-valued function on the covering space ℝ^d of the base.

    Finite sum Σ_k m_k(x)·p_k(x), a monomial in the raw cover coordinates
    times a periodic trig-poly row (one scalar per V-coordinate).  Closed
    under +, products with periodic scalars, cover partials and directional
    derivatives along periodic vector fields — which is all the bracket of
    projectable fields needs.  Gauge potentials ((R₀x) dy), deck shifts
    (−R₀y) and cover-level hamiltonians (y + periodic) all live here.
    """

    def __init__(self, base: str, vdim: int, terms: dict | None = None):
        if base not in _DIMS:
            raise ValueError(f"cover functions live over S1/T2, not {base!r}")
        self.base = base
        self.dim = _DIMS[base]
        self.vdim = vdim
        self.terms = {}
        for expo, row in (terms or {}).items():
            expo = tuple(int(e) for e in expo)
            if len(expo) != self.dim or any(e < 0 for e in expo):
                raise ValueError(f"bad monomial exponent {expo}")
            row = list(row)
            if len(row) != vdim:
                raise ValueError("row width does not match vdim")
            if any(p.coeff_norm() > 0.0 for p in row):
                self.terms[expo] = row

    # -- constructors ----------------------------------------------------------

    @classmethod
    def zero(cls, base: str, vdim: int) -> "CoverFunction":
        return cls(base, vdim)

    @classmethod
    def from_periodic(cls, base: str, row) -> "CoverFunction":
        row = list(row) if isinstance(row, (list, tuple)) else [row]
        return cls(base, len(row), {(0,) * _DIMS[base]: row})

    @classmethod
    def constant(cls, base: str, values) -> "CoverFunction":
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if base == "S1":
            row = [TrigPoly.constant(v) for v in values]
        else:
            row = [TrigPoly2.constant(v) for v in values]
        return cls(base, values.size, {(0,) * _DIMS[base]: row})

    @classmethod
    def monomial(cls, base: str, expo, values) -> "CoverFunction":
        """values · x^expo (values a constant V-vector)."""
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if base == "S1":
            row = [TrigPoly.constant(v) for v in values]
        else:
            row = [TrigPoly2.constant(v) for v in values]
        return cls(base, values.size, {tuple(expo): row})

    # -- linear structure --------------------------------------------------------

    def _check(self, other: "CoverFunction"):
        if (self.base, self.vdim) != (other.base, other.vdim):
            raise ValueError("cover functions have different base/value shape")

    def __add__(self, other: "CoverFunction") -> "CoverFunction":
        self._check(other)
        terms = {e: list(r) for e, r in self.terms.items()}
        for expo, row in other.terms.items():
            if expo in terms:
                terms[expo] = [p + q for p, q in zip(terms[expo], row)]
            else:
                terms[expo] = list(row)
        return CoverFunction(self.base, self.vdim, terms)

    def __neg__(self) -> "CoverFunction":
        return CoverFunction(
            self.base, self.vdim, {e: [-p for p in r] for e, r in self.terms.items()}
        )

    def __sub__(self, other: "CoverFunction") -> "CoverFunction":
        return self + (-other)

    def __mul__(self, s) -> "CoverFunction":
        """Product with a float or a periodic scalar (TrigPoly/TrigPoly2)."""
        if isinstance(s, (int, float)):
            s = float(s)
        return CoverFunction(
            self.base, self.vdim, {e: [p * s for p in r] for e, r in self.terms.items()}
        )

    __rmul__ = __mul__

    def map_matrix(self, mat) -> "CoverFunction":
        """Apply a linear map of V: (m·f)_i = Σ_j m_ij f_j."""
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        if mat.shape != (self.vdim, self.vdim):
            raise ValueError("matrix does not match the value dimension")
        terms = {}
        for expo, row in self.terms.items():
            new_row = []
            for i in range(self.vdim):
                acc = row[0] * mat[i, 0]
                for j in range(1, self.vdim):
                    acc = acc + row[j] * mat[i, j]
                new_row.append(acc)
            terms[expo] = new_row
        return CoverFunction(self.base, self.vdim, terms)

    # -- calculus -------------------------------------------------------------------

    def partial(self, axis: int) -> "CoverFunction":
        """Cover partial: ∂_a (x^e p) = e_a x^{e−δ_a} p + x^e ∂_a p."""
        out = CoverFunction.zero(self.base, self.vdim)
        for expo, row in self.terms.items():
            dper = {expo: [_scalar_partial(p, axis) for p in row]}
            out = out + CoverFunction(self.base, self.vdim, dper)
            if expo[axis] > 0:
                lower = tuple(
                    e - (1 if a == axis else 0) for a, e in enumerate(expo)
                )
                out = out + CoverFunction(
                    self.base, self.vdim, {lower: [p * float(expo[axis]) for p in row]}
                )
        return out

    def apply_field(self, x: VectorField) -> "CoverFunction":
        """Directional derivative X(f) along a periodic vector field."""
        if x.base != self.base:
            raise ValueError("vector field and cover function bases differ")
        out = CoverFunction.zero(self.base, self.vdim)
        for axis in range(self.dim):
            out = out + self.partial(axis) * x.comps[axis]
        return out

    # -- evaluation -------------------------------------------------------------------

    def evaluate(self, *coords) -> np.ndarray:
        """Values at raw cover coordinates; shape (vdim,) + point-shape."""
        if len(coords) != self.dim:
            raise ValueError(f"need {self.dim} coordinate array(s)")
        pts = [np.asarray(c, dtype=float) for c in coords]
        shape = np.broadcast_shapes(*(p.shape for p in pts))
        out = np.zeros((self.vdim,) + shape)
        for expo, row in self.terms.items():
            mono = np.ones(shape)
            for e, c in zip(expo, pts):
                if e:
                    mono = mono * c ** e
            vals = np.array(
                [np.asarray(p(*pts)).reshape(shape) for p in row]
            )
            out = out + mono * vals
        return out

    @property
    def is_periodic(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def sup_window(self, lo: float = -0.5, hi: float = 1.5, n: int = 31) -> float:
        """Grid sup over the cover window [lo,hi]^d (monomials make a plain
        period-cell sup meaningless)."""
        xs = np.linspace(lo, hi, n)
        if self.dim == 1:
            return float(np.max(np.abs(self.evaluate(xs)))) if self.terms else 0.0
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        if not self.terms:
            return 0.0
        return float(np.max(np.abs(self.evaluate(gx.ravel(), gy.ravel()))))

    def __repr__(self):
        expos = sorted(self.terms)
        return f"CoverFunction({self.base}, vdim={self.vdim}, monomials={expos})"


# ---------------------------------------------------------------------------
# bundle charts
# ---------------------------------------------------------------------------

def _coulomb_primitive(scalar: TrigPoly2) -> TrigPoly2:
    """φ with Δφ = scalar (mean-zero input), mean-zero output; exact in
    coefficients."""
    n1, n2 = scalar.degrees
    k1 = np.arange(-n1, n1 + 1)[:, None].astype(float)
    k2 = np.arange(-n2, n2 + 1)[None, :].astype(float)
    lam = -(TWO_PI ** 2) * (k1 ** 2 + k2 ** 2)
    safe = np.where(lam == 0.0, 1.0, lam)
    out = np.where(lam == 0.0, 0.0, scalar.c / safe)
    return TrigPoly2(out)


class BundleChart:
    """Chart data for a principal A-bundle over S¹ or T².

    mode 'trivial':  P = M × V, θ = q*α + dw, deck shifts zero.
    mode 'magnetic': T² only, cover potential A = (R₀·x) dy + Ã and deck
    shift ψ₁(y) = −R₀·y across x → x+1 (y-crossings are free).

    Charts are immutable; all transport state is local to each call.
    """

    def __init__(self, base, mode, vdim, lattice, alpha=None, omega=None):
        # use the .trivial()/.magnetic() constructors; this just stores
        self.base = base
        self.mode = mode
        self.vdim = vdim
        self.lattice = lattice
        self.alpha = alpha
        self.omega = omega
        self._pot = self._build_potential()
        self._deck = self._build_deck()

    # -- constructors ----------------------------------------------------------

    @classmethod
    def trivial(cls, base: str, alpha: VForm, lattice: LatticeGroup | None = None):
        if alpha.degree != 1 or alpha.base != base:
            raise ValueError("trivial charts take a 1-form on the base")
        omega = alpha.d()
        lattice = LatticeGroup([], n=alpha.vdim) if lattice is None else lattice
        if lattice.n != alpha.vdim:
            raise ValueError("lattice dimension does not match the value space")
        return cls(base, "trivial", alpha.vdim, lattice, alpha=alpha, omega=omega)

    @classmethod
    def flat(cls, base: str, vdim: int = 1, lattice: LatticeGroup | None = None):
        return cls.trivial(base, VForm.zero(base, 1, vdim), lattice)

    @classmethod
    def magnetic(cls, omega: VForm, lattice: LatticeGroup | None = None):
        if omega.base != "T2" or omega.degree != 2:
            raise ValueError("magnetic charts take a 2-form on T2")
        if lattice is None:
            lattice = period_group(omega)
        r0 = omega.full_period_integral()
        if lattice.n != omega.vdim:
            raise ValueError("lattice dimension does not match the value space")
        if not lattice.contains(r0, tol=TOL.quad):
            raise ValueError(
                "lattice does not contain the period vector of ω: the deck "
                "shifts would be inconsistent"
            )
        return cls("T2", "magnetic", omega.vdim, lattice, omega=omega)

    # -- chart data --------------------------------------------------------------

    @property
    def dim(self) -> int:
        return _DIMS[self.base]

    @property
    def period_vector(self) -> np.ndarray:
        return self.omega.full_period_integral()

    def periodic_potential_form(self) -> VForm:
        """The periodic part of the gauge potential as a VForm (α in trivial
        mode, the Coulomb primitive Ã in magnetic mode)."""
        if self.mode == "trivial":
            return self.alpha
        rows_x, rows_y = [], []
        for j in range(self.vdim):
            tilde = self.omega.comps[0][j] - TrigPoly2.constant(self.period_vector[j])
            phi = _coulomb_primitive(tilde)
            rows_x.append(-phi.partial(1))
            rows_y.append(phi.partial(0))
        return VForm("T2", 1, [rows_x, rows_y])

    def _build_potential(self):
        per = self.periodic_potential_form()
        pot = [CoverFunction.from_periodic(self.base, per.comps[a]) for a in range(self.dim)]
        if self.mode == "magnetic":
            pot[1] = pot[1] + CoverFunction.monomial("T2", (1, 0), self.period_vector)
        return pot

    def _build_deck(self):
        deck = [CoverFunction.zero(self.base, self.vdim) for _ in range(self.dim)]
        if self.mode == "magnetic":
            deck[0] = CoverFunction.monomial("T2", (0, 1), -self.period_vector)
        return deck

    @property
    def potential(self):
        """Gauge potential rows A_a as CoverFunctions (θ = Σ A_a dx_a + dw)."""
        return list(self._pot)

    def deck_shift(self, axis: int) -> CoverFunction:
        """Fiber shift ψ_a: (p, w) ~ (p + e_a, w + ψ_a(p))."""
        return self._deck[axis]

    def apply_potential(self, eta: VectorField) -> CoverFunction:
        """A(η) = Σ_a A_a η^a as a cover function."""
        if eta.base != self.base:
            raise ValueError("field and chart bases differ")
        acc = CoverFunction.zero(self.base, self.vdim)
        for a in range(self.dim):
            acc = acc + self._pot[a] * eta.comps[a]
        return acc

    def theta(self, point, base_tangent, fiber_tangent) -> np.ndarray:
        """θ_(x,w)(u, s) = A(x)(u) + s, evaluated at cover points."""
        if isinstance(point, (list, tuple)):
            coords = [np.asarray(c, dtype=float) for c in point]
        else:
            arr = np.atleast_1d(np.asarray(point, dtype=float))
            coords = [arr[a] for a in range(self.dim)]
        u = np.atleast_1d(np.asarray(base_tangent, dtype=float))
        acc = np.zeros(self.vdim) + np.asarray(fiber_tangent, dtype=float)
        for a in range(self.dim):
            acc = acc + self._pot[a].evaluate(*coords) * u[a]
        return acc

    def curvature_residual(self, grid: int = 33) -> float:
        """sup |dA − ω| on the cover window [0,2)² (S¹ has no 2-forms and the
        residual is structurally zero)."""
        if self.base == "S1":
            return 0.0
        two_form = self._pot[1].partial(0) - self._pot[0].partial(1)
        target = CoverFunction.from_periodic("T2", self.omega.comps[0])
        return (two_form - target).sup_window(0.0, 2.0, grid)

    def reduce(self, v) -> np.ndarray:
        return self.lattice.reduce(v)

    # -- serialization ---------------------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "schema": "chart/1",
            "base": self.base,
            "mode": self.mode,
            "vdim": self.vdim,
            "lattice": self.lattice.to_dict(),
        }
        if self.mode == "trivial":
            d["alpha"] = self.alpha.to_dict()
        else:
            d["omega"] = self.omega.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BundleChart":
        if d.get("schema") != "chart/1":
            raise ValueError(f"not a chart/1 payload: {d.get('schema')!r}")
        lattice = LatticeGroup.from_dict(d["lattice"])
        if d["mode"] == "trivial":
            return cls.trivial(d["base"], VForm.from_dict(d["alpha"]), lattice)
        if d["mode"] == "magnetic":
            return cls.magnetic(VForm.from_dict(d["omega"]), lattice)
        raise ValueError(f"unknown chart mode {d['mode']!r}")

    def __repr__(self):
        return f"BundleChart({self.base}, {self.mode}, vdim={self.vdim})"


def loop_from_dict(d: dict) -> Curve:
    """Loop payloads for the CLI: polyline vertices or a trig-poly curve."""
    if d.get("schema") != "loop/1":
        raise ValueError(f"not a loop/1 payload: {d.get('schema')!r}")
    kind = d.get("kind")
    if kind == "polyline":
        return polyline_loop(d["vertices"])
    if kind == "trig":
        polys = [TrigPoly.from_dict(p) for p in d["polys"]]
        return trig_curve(d["windings"], polys)
    raise ValueError(f"unknown loop kind {kind!r}")


# ---------------------------------------------------------------------------
# parallel transport and holonomy
# ---------------------------------------------------------------------------

def parallel_transport(chart: BundleChart, path: Curve, start, steps: int | None = None) -> np.ndarray:
    """Endpoint fiber coordinate of the horizontal lift through `start`.

    Horizontality i_{ℓ'}θ = 0 reads ẇ = −A(c(t))·ċ(t) in the chart: the
    right-hand side has no w-dependence (A abelian), so classic RK4 stepping
    collapses to composite Simpson — still fourth order, and the A-equivariance
    transport(w + a) = transport(w) + a is exact by construction.
    """
    steps = RES.ode_steps if steps is None else int(steps)
    if steps < 1:
        raise ValueError("transport needs at least one step per segment")
    if path.dim != chart.dim:
        raise ValueError("path dimension does not match the chart base")
    start = np.atleast_1d(np.asarray(start, dtype=float))
    if start.size != chart.vdim:
        raise ValueError("start fiber point has the wrong dimension")
    shift = np.zeros(chart.vdim)
    t = np.linspace(0.0, 1.0, 2 * steps + 1)
    w = np.ones(2 * steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= 1.0 / (6.0 * steps)
    for seg in path.segments:
        pts = seg.point(t)
        vel = seg.velocity(t)
        rhs = np.zeros((chart.vdim, t.size))
        for a in range(chart.dim):
            rhs -= chart._pot[a].evaluate(*pts) * vel[a]
        if not np.all(np.isfinite(rhs)):
            raise RuntimeError("transport right-hand side is not finite")
        shift = shift + rhs @ w
    return start + shift


def _deck_correction(chart: BundleChart, start: np.ndarray, winding) -> np.ndarray:
    """Σ ψ along the staircase from `start` to `start + winding`.

    Walk order is fixed (all y-steps first, then x-steps): crossings commute
    only up to the period vector R₀ ∈ Γ, so any other order gives the same
    correction mod Γ.
    """
    p = np.array(start, dtype=float)
    corr = np.zeros(chart.vdim)
    axes = (1, 0) if chart.dim == 2 else (0,)
    for a in axes:
        n = int(winding[a])
        for _ in range(abs(n)):
            if n > 0:
                corr += chart.deck_shift(a).evaluate(*p)
                p[a] += 1.0
            else:
                p[a] -= 1.0
                corr -= chart.deck_shift(a).evaluate(*p)
    return corr


def stokes_flux(chart: BundleChart, loop: Curve) -> np.ndarray:
    """∫_Σ ω over the star-shaped filling of a contractible loop."""
    winding = loop.winding()
    if np.max(np.abs(winding)) > TOL.ode:
        raise ValueError("Stokes evaluation needs a contractible loop")
    if chart.base == "S1":
        return np.zeros(chart.vdim)
    return integrate_over_chain(chart.omega, cone_chain(loop, loop.start()))


def holonomy_report(chart: BundleChart, loop: Curve, steps: int | None = None) -> dict:
    """Both holonomy evaluation routes for a closed loop.

    'transport' is the ODE endpoint from fiber 0, 'raw' adds the deck
    corrections (this is the holonomy in V before reduction), 'value' is the
    reduced A-element.  For contractible loops 'stokes_value' is the second
    route exp(−∫_Σ ω); it must agree with 'value' within TOL.ode.
    """
    w = loop.winding()
    n = np.round(w).astype(int)
    if np.max(np.abs(w - n)) > TOL.ode:
        raise ValueError(f"loop is not closed on the quotient (winding {w.tolist()})")
    v_end = parallel_transport(chart, loop, np.zeros(chart.vdim), steps)
    corr = _deck_correction(chart, loop.start(), n)
    raw = v_end - corr
    report = {
        "winding": n.tolist(),
        "transport": v_end,
        "raw": raw,
        "value": chart.reduce(raw),
        "stokes_value": None,
    }
    if not np.any(n):
        report["stokes_value"] = chart.reduce(-stokes_flux(chart, loop))
    return report


def holonomy(chart: BundleChart, loop: Curve, steps: int | None = None) -> np.ndarray:
    """h(ℓ) ∈ A (fundamental-domain coordinates): the defining property is
    ρ(ℓ^hor(0), h(ℓ)) = ℓ^hor(1) after deck identification."""
    return holonomy_report(chart, loop, steps)["value"]


# ---------------------------------------------------------------------------
# gauge transformations: ρ(f)*θ = θ + δˡ(f)
# ---------------------------------------------------------------------------

def rho_pullback_check(chart: BundleChart, f, grid: int = 13, trials: int = 4,
                       rng: np.random.Generator | None = None) -> float:
    """Residual of ρ(f)*θ = θ + δˡ(f) for the gauge transformation
    ρ(f)(x, w) = (x, w + F(x)), f = exp∘F.

    The left side pushes tangents through ρ(f) with a fourth-order central
    difference (step RES.fd_step) and evaluates θ at the image; the right
    side differentiates F in coefficients.  Agreement is what ties the chart's
    evaluation machinery to its coefficient calculus.
    """
    if isinstance(f, VForm):
        if f.degree != 0 or f.base != chart.base:
            raise ValueError("gauge map needs a 0-form on the chart base")
        f = CoverFunction.from_periodic(chart.base, f.comps[0])
    if f.vdim != chart.vdim:
        raise ValueError("gauge map value dimension does not match the chart")
    rng = np.random.default_rng(0) if rng is None else rng
    xs = np.linspace(0.0, 1.0, grid, endpoint=False) + 0.015
    if chart.dim == 1:
        pts = [xs]
    else:
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        pts = [gx.ravel(), gy.ravel()]
    h = RES.fd_step
    worst = 0.0
    for _ in range(trials):
        u = rng.uniform(-1.0, 1.0, chart.dim)
        s = rng.uniform(-1.0, 1.0, chart.vdim)
        # dF(u) by the 5-point stencil along u (the map's fiber pushforward)
        vals = []
        for c in (-2.0, -1.0, 1.0, 2.0):
            moved = [p + c * h * u[a] for a, p in enumerate(pts)]
            vals.append(f.evaluate(*moved))
        # paired differences first: constants cancel exactly, not just to O(eps/h)
        df_fd = (8.0 * (vals[2] - vals[1]) - (vals[3] - vals[0])) / (12.0 * h)
        # LHS: θ at the image point (same base point; the map is vertical)
        lhs = chart.theta(pts, u, s[:, None]) + df_fd
        # RHS: θ + δˡ(f) in coefficients
        df_coeff = CoverFunction.zero(chart.base, chart.vdim)
        for a in range(chart.dim):
            df_coeff = df_coeff + f.partial(a) * float(u[a])
        rhs = chart.theta(pts, u, s[:, None]) + df_coeff.evaluate(*pts)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


# ---------------------------------------------------------------------------
# projectable vector fields on P
# ---------------------------------------------------------------------------

class PVectorField:
    """Projectable vector field in chart coordinates.

    ξ = (η, c₀(x) + Γ·w): base part a periodic vector field, fiber part
    affine in the fiber coordinate — the shape of every field §-calculus
    needs (horizontal lifts, ρ̇(h) for almost-A-invariant h, and their
    brackets, which stay in the class).
    """

    def __init__(self, base: str, eta: VectorField, c0: CoverFunction, gmat):
        if eta.base != base or c0.base != base:
            raise ValueError("component bases differ")
        self.base = base
        self.eta = eta
        self.c0 = c0
        self.gmat = np.atleast_2d(np.asarray(gmat, dtype=float))
        if self.gmat.shape != (c0.vdim, c0.vdim):
            raise ValueError("fiber matrix does not match the value dimension")
        self.hamiltonian = None  # set by souriau_field

    @property
    def vdim(self) -> int:
        return self.c0.vdim

    @classmethod
    def zero_field(cls, base: str, vdim: int) -> VectorField:
        if base == "S1":
            return VectorField.on_circle(TrigPoly.zero())
        return VectorField.on_torus(TrigPoly2.zero(), TrigPoly2.zero())

    @classmethod
    def vertical(cls, base: str, v) -> "PVectorField":
        """ρ̇(v) for a constant v ∈ V."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return cls(base, cls.zero_field(base, v.size),
                   CoverFunction.constant(base, v), np.zeros((v.size, v.size)))

    def __neg__(self) -> "PVectorField":
        return PVectorField(self.base, -self.eta, -self.c0, -self.gmat)

    def __sub__(self, other: "PVectorField") -> "PVectorField":
        return PVectorField(self.base, self.eta - other.eta,
                            self.c0 - other.c0, self.gmat - other.gmat)

    def bracket(self, other: "PVectorField") -> "PVectorField":
        """Jacobi–Lie bracket; fiber parts stay affine in w:
        [ξ₁,ξ₂] = ([η₁,η₂], η₁·c₂ − η₂·c₁ + Γ₂c₁ − Γ₁c₂ + (Γ₂Γ₁−Γ₁Γ₂)·w)."""
        eta = self.eta.bracket_std(other.eta)
        c = (other.c0.apply_field(self.eta) - self.c0.apply_field(other.eta)
             + self.c0.map_matrix(other.gmat) - other.c0.map_matrix(self.gmat))
        g = other.gmat @ self.gmat - self.gmat @ other.gmat
        return PVectorField(self.base, eta, c, g)

    def theta_pairing(self, chart: BundleChart):
        """i_ξθ = c_θ(x) + Γ_θ·w; returns (c_θ, Γ_θ)."""
        return chart.apply_potential(self.eta) + self.c0, self.gmat

    def __repr__(self):
        return f"PVectorField({self.base}, vdim={self.vdim})"


class ChartFunction:
    """h(x, w) = h₀(x) − γ·w: the chart shape of an almost A-invariant
    function (so L_{ρ̇(v)}h = −γ(v) by construction, and h − h∘ρ(a) is the
    constant γ̄(a) = γ·a)."""

    def __init__(self, h0: CoverFunction, gamma):
        self.h0 = h0
        self.gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
        if self.gamma.shape != (h0.vdim, h0.vdim):
            raise ValueError("γ does not match the value dimension")

    @property
    def vdim(self) -> int:
        return self.h0.vdim

    def value(self, point, w) -> np.ndarray:
        pts = [np.asarray(c, dtype=float) for c in point]
        w = np.asarray(w, dtype=float)
        return self.h0.evaluate(*pts) - np.tensordot(self.gamma, w, axes=(1, 0))

    def compose_rho(self, a) -> "ChartFunction":
        """h∘ρ(a) in the same chart: shifts h₀ by the constant −γ·a."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        shift = CoverFunction.constant(self.h0.base, -(self.gamma @ a))
        return ChartFunction(self.h0 + shift, self.gamma)

    def gamma_bar(self, a) -> np.ndarray:
        """γ̄(a) = γ·(a's lift); well defined because γ kills Γ."""
        return self.gamma @ np.atleast_1d(np.asarray(a, dtype=float))


# ---------------------------------------------------------------------------
# Souriau sections: ξ_h = η^hor − ρ̇(h)
# ---------------------------------------------------------------------------

class NotAdmissible(Exception):
    """No hamiltonian data within the degree budget (or ω degenerate)."""

    def __init__(self, msg: str, residual: float | None = None):
        self.residual = residual
        super().__init__(msg)


def _solve_hamiltonian_field(chart: BundleChart, rhs: VForm, budget: int) -> VectorField:
    """η with i_ηω = rhs, solved pointwise and projected to the budget."""
    if chart.omega.is_structural_zero or chart.omega.sup_norm() <= TOL.coeff:
        if rhs.sup_norm() > TOL.quad:
            raise NotAdmissible(
                "the curvature vanishes identically: only locally constant "
                "hamiltonians are admissible", residual=rhs.sup_norm())
        return PVectorField.zero_field(chart.base, chart.vdim)
    nyquist = max(
        2 * max(p.degrees[0], p.degrees[1]) + 1
        for row in (chart.omega.comps[0], rhs.comps[0], rhs.comps[1])
        for p in row
    )
    g = max(RES.oversample * (2 * budget + 1), nyquist)
    wv = np.array([p.sample(g, g) for p in chart.omega.comps[0]])  # (n, g, g)
    bx = np.array([p.sample(g, g) for p in rhs.comps[0]])
    by = np.array([p.sample(g, g) for p in rhs.comps[1]])
    denom = np.sum(wv * wv, axis=0)
    if float(np.min(denom)) <= TOL.mono ** 2:
        raise NotAdmissible("ω is degenerate somewhere: hamiltonian fields "
                            "are only determined up to its kernel")
    # i_ηω = (−η^y ω_j) dx + (η^x ω_j) dy for every value coordinate j
    ex = project_torus(np.sum(wv * by, axis=0) / denom, (budget, budget))
    ey = project_torus(-np.sum(wv * bx, axis=0) / denom, (budget, budget))
    eta = VectorField.on_torus(ex, ey)
    res = (chart.omega.interior(eta) - rhs).sup_norm()
    if res > TOL.quad:
        raise NotAdmissible(
            f"no trig-poly hamiltonian field within degree budget {budget} "
            f"(residual {res:.3e})", residual=res)
    return eta


def souriau_field(chart: BundleChart, f: VForm | None = None,
                  eta: VectorField | None = None, gamma=None,
                  base_point=None, budget: int | None = None) -> PVectorField:
    """The section ξ = η^hor − ρ̇(h) over a hamiltonian datum.

    Exactly one of `f`, `eta` must be given.

    * f (0-form on the base, with optional γ): h₀ = f, and the field is
      solved from i_ηω = df + γ·A within the Fourier budget.  γ = None is
      the invariant case ξ_f = η_f^hor − ρ̇(q*f).
    * eta (with optional γ): h₀ is solved as the cover primitive of
      i_ηω − γ·A — linear growth p·x plus a periodic part, so hamiltonians
      like h = y that only exist on the cover are first-class citizens.

    `base_point` = (base coords, fiber w₀) normalizes h(y₀) = 0.  The
    returned field carries `.hamiltonian` (a ChartFunction).  Postconditions
    −i_ξθ = h and L_ξθ = γ·θ are checked by `souriau_residuals`.
    """
    budget = RES.fourier_budget if budget is None else int(budget)
    n = chart.vdim
    gmat = np.zeros((n, n)) if gamma is None else np.atleast_2d(np.asarray(gamma, float))
    if gmat.shape != (n, n):
        raise ValueError("γ must be a square matrix on the value space")
    if (f is None) == (eta is None):
        raise ValueError("give exactly one of f=… (function) or eta=… (field)")
    has_gamma = float(np.max(np.abs(gmat))) > 0.0
    if has_gamma and chart.mode == "magnetic":
        leak = float(np.max(np.abs(gmat @ chart.period_vector)))
        if leak > TOL.quad:
            raise ValueError(
                "γ must annihilate the period vector of ω (γ·R₀ = 0): "
                f"got |γ·R₀| = {leak:.3e}")
    a_per = chart.periodic_potential_form()

    if eta is None:
        if f.degree != 0 or f.base != chart.base:
            raise ValueError("hamiltonian functions are 0-forms on the base")
        if f.vdim != n:
            raise ValueError("hamiltonian value dimension does not match")
        rhs = f.d()
        if has_gamma:
            rhs = rhs + a_per.map_values(LinearMap(gmat))
        eta = _solve_hamiltonian_field(chart, rhs, budget)
        h0 = CoverFunction.from_periodic(chart.base, f.comps[0])
    else:
        if eta.base != chart.base:
            raise ValueError("field base does not match the chart")
        beta = chart.omega.interior(eta)
        if has_gamma:
            beta = beta - a_per.map_values(LinearMap(gmat))
        if beta.d().sup_norm() > TOL.quad:
            raise NotAdmissible(
                "(η, γ) is not ω-equivariant: i_ηω − γ·A is not closed "
                f"(|d| = {beta.d().sup_norm():.3e})")
        periods = loop_evaluations(beta)
        h0 = CoverFunction.zero(chart.base, n)
        rest = beta
        if chart.base == "S1":
            p = periods["base"]
            h0 = h0 + CoverFunction.monomial("S1", (1,), p)
            rest = rest - VForm.one_form("S1", [TrigPoly.constant(v) for v in p])
        else:
            px, py = periods["base_x"], periods["base_y"]
            h0 = (h0 + CoverFunction.monomial("T2", (1, 0), px)
                  + CoverFunction.monomial("T2", (0, 1), py))
            rest = rest - VForm.one_form(
                "T2",
                [TrigPoly2.constant(v) for v in px],
                [TrigPoly2.constant(v) for v in py],
            )
        fper, _ = primitive_of_closed_1form(rest, budget)
        h0 = h0 + CoverFunction.from_periodic(chart.base, fper.comps[0])

    if base_point is not None:
        x0, w0 = base_point
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        w0 = np.atleast_1d(np.asarray(w0, dtype=float))
        c = h0.evaluate(*x0) - gmat @ w0
        h0 = h0 + CoverFunction.constant(chart.base, -c)

    c0 = -(chart.apply_potential(eta)) - h0
    xi = PVectorField(chart.base, eta, c0, gmat)
    xi.hamiltonian = ChartFunction(h0, gmat)
    return xi


def souriau_residuals(chart: BundleChart, xi: PVectorField) -> dict:
    """Postcondition residuals for a Souriau section.

    pairing : sup |i_ξθ + h|             (h from xi.hamiltonian)
    lie     : sup |L_ξθ − γ·θ|           (rows i_ηω_a + ∂_a c_θ vs γ·A_a;
                                          the dw-row cancels exactly)
    Both are cover-window sups; the lie residual redifferentiates the solved
    primitive, so it is an honest roundtrip and not a tautology.
    """
    if xi.hamiltonian is None:
        raise ValueError("field has no attached hamiltonian")
    c_theta, g_theta = xi.theta_pairing(chart)
    pairing = (c_theta + xi.hamiltonian.h0).sup_window()
    pairing += float(np.max(np.abs(g_theta - xi.hamiltonian.gamma)))
    ix_omega = chart.omega.interior(xi.eta)
    lie = 0.0
    for a in range(chart.dim):
        row = (CoverFunction.from_periodic(chart.base, ix_omega.comps[a])
               + c_theta.partial(a)
               - chart._pot[a].map_matrix(g_theta))
        lie = max(lie, row.sup_window())
    return {"pairing": pairing, "lie": lie}


# ---------------------------------------------------------------------------
# the quantomorphism bracket defect
# ---------------------------------------------------------------------------

def quantomorphism_bracket_defect(chart: BundleChart, eta1: VectorField,
                                  eta2: VectorField, x0, gamma1=None,
                                  gamma2=None, grid: int = 5) -> np.ndarray:
    """[s(η₁), s(η₂)] − s([η₁, η₂]) as the vertical vector ρ̇(v); returns v.

    Sections are Souriau fields with hamiltonians vanishing at y₀ = (x₀, 0).
    Brackets upstairs and downstairs are taken in the group convention (the
    negated Jacobi–Lie commutator, matrix commutator on the γ-parts), under
    which v = −ω(η₁, η₂)(x₀).  The base and dw parts of the defect cancel in
    coefficients; the fiber part must be constant over the sample grid, and
    any failure of either raises rather than averaging it away.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = chart.vdim
    g1 = np.zeros((n, n)) if gamma1 is None else np.atleast_2d(np.asarray(gamma1, float))
    g2 = np.zeros((n, n)) if gamma2 is None else np.atleast_2d(np.asarray(gamma2, float))
    y0 = (x0, np.zeros(n))
    xi1 = souriau_field(chart, eta=eta1, gamma=g1, base_point=y0)
    xi2 = souriau_field(chart, eta=eta2, gamma=g2, base_point=y0)
    lhs = -(xi1.bracket(xi2))
    eta12 = -(eta1.bracket_std(eta2))
    g12 = g1 @ g2 - g2 @ g1
    s12 = souriau_field(chart, eta=eta12, gamma=g12, base_point=y0)
    defect = lhs - s12
    tol = 10.0 * TOL.quad
    if defect.eta.sup_norm() > tol:
        raise RuntimeError(
            f"bracket defect is not vertical (base residual {defect.eta.sup_norm():.3e})")
    if float(np.max(np.abs(defect.gmat))) > tol:
        raise RuntimeError("bracket defect has a non-constant fiber slope")
    xs = np.linspace(0.07, 0.93, grid)
    if chart.dim == 1:
        vals = defect.c0.evaluate(xs)
    else:
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        vals = defect.c0.evaluate(gx.ravel(), gy.ravel())
    spread = float(np.max(np.max(vals, axis=1) - np.min(vals, axis=1)))
    if spread > tol:
        raise RuntimeError(f"bracket defect is not constant (spread {spread:.3e})")
    return np.mean(vals, axis=1)
