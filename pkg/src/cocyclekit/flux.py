"""Flux 1-cocycles attached to a prequantization chart.

An equivariant pair (η, γ) — a vector field and a matrix with
L_η ω = γ·ω — has the closed V-valued 1-form

    i_η ω − γ·θ      (θ = Σ_a A_a dx_a + dw the chart connection)

on the total space, and its cohomology class is the infinitesimal flux.
A path (φ_t, u_t) whose nodes satisfy φ_t^*ω = u_t·ω integrates to the
path flux

    B = ∫₀¹ u_t · ( i_{δˡφ_t} ω − δˡu_t·θ ) dt,

well defined modulo classes with Γ-valued loop evaluations: a closed path
(loop at the identity) evaluates inside the period lattice Γ on every basis
loop.  For ω-invariant paths (u ≡ 1) the downstairs flux ∫₀¹ [i_{δφ_t}ω] dt
is computed from both the left and the right logarithmic derivative; the two
loop evaluations have to agree and the gap is reported.

Classes are carried by their evaluations on a fixed loop basis: the base
generators at fiber 0 (which close up in a chart because the fiber shift
vanishes along the coordinate axes through the origin), and one fiber loop
t ↦ t·g per lattice generator g at the base origin.  Quotients by the
Γ-integral classes then reduce to per-loop lattice reduction.
"""

from __future__ import annotations

import numpy as np

from .bundle import BundleChart, ChartFunction, CoverFunction, period_group
from .config import RES, TOL
from .diffeopath import (
    DiffeoPath,
    GLPath,
    equivariance_residual,
    infinitesimal_equivariance_residual,
    pullback,
)
from .trigcalc import (
    LinearMap,
    VForm,
    VectorField,
    loop_evaluations,
    primitive_of_closed_1form,
)

__all__ = [
    "CohClass1",
    "flux_eq_infinitesimal",
    "flux_eq_path",
    "flux_eq_exact_chart",
    "flux_invariant_path",
    "elevation_residual",
    "equi_hamiltonian_solve",
]


# ---------------------------------------------------------------------------
# time quadrature on path nodes
# ---------------------------------------------------------------------------

def _time_weights(n: int) -> np.ndarray:
    """Quadrature weights for n uniform nodes on [0, 1].

    Composite Simpson; an odd interval count gets a 3/8 block on the last
    three intervals; two nodes fall back to the trapezoid.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    k = n - 1
    if k == 1:
        return np.array([0.5, 0.5])
    w = np.zeros(n)
    m = k if k % 2 == 0 else k - 3
    if m > 0:
        w[0] += 1.0 / 3.0
        w[m] += 1.0 / 3.0
        w[1:m:2] += 4.0 / 3.0
        w[2:m:2] += 2.0 / 3.0
    if m < k:
        w[m] += 3.0 / 8.0
        w[m + 1] += 9.0 / 8.0
        w[m + 2] += 9.0 / 8.0
        w[k] += 3.0 / 8.0
    return w / k


def _as_gamma(gamma, vdim: int) -> np.ndarray:
    if gamma is None:
        return np.zeros((vdim, vdim))
    g = np.atleast_2d(np.asarray(gamma, dtype=float))
    if g.shape != (vdim, vdim):
        raise ValueError("γ does not match the chart value dimension")
    return g


# ---------------------------------------------------------------------------
# degree-1 classes via loop evaluations
# ---------------------------------------------------------------------------

class CohClass1:
    """A degree-1 cohomology class, carried by loop-basis evaluations.

    evals[i] ∈ V is the integral of a closed representative over the basis
    loop labels[i]; lattices[i] is the per-loop ambiguity (None for honest
    classes, the chart lattice for classes defined modulo Γ-integral
    classes).  Representative data, when available, sits on `rep` as
    {"base": VForm¹, "fiber": constant matrix or None} with the measured
    d-residual on `closed_residual`.
    """

    def __init__(self, labels, evals, lattices=None):
        self.labels = tuple(labels)
        ev = np.atleast_2d(np.asarray(evals, dtype=float))
        if ev.shape[0] != len(self.labels):
            raise ValueError("one evaluation row per basis loop")
        self.evals = ev
        if lattices is None:
            lattices = (None,) * len(self.labels)
        self.lattices = tuple(lattices)
        if len(self.lattices) != len(self.labels):
            raise ValueError("one ambiguity lattice per basis loop")
        self.rep = None
        self.closed_residual = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def on_manifold(cls, beta: VForm, lattice=None, tol: float | None = None
                    ) -> "CohClass1":
        """Class of a closed 1-form on the base manifold."""
        tol = TOL.coeff if tol is None else tol
        res = beta.d().sup_norm()
        if res > tol:
            raise ValueError(f"representative is not closed: d-residual {res:.3e}")
        ev = loop_evaluations(beta)
        labels = tuple(sorted(ev))
        lats = None if lattice is None else (lattice,) * len(labels)
        obj = cls(labels, [ev[l] for l in labels], lats)
        obj.rep = {"base": beta, "fiber": None}
        obj.closed_residual = res
        return obj

    @classmethod
    def on_chart(cls, chart: BundleChart, beta: VForm, fiber_mat,
                 quotient: bool = False, tol: float | None = None) -> "CohClass1":
        """Class on the total space: periodic base rows + a constant fiber row.

        `beta` is the base part of the representative (the dx_a rows),
        `fiber_mat` the constant matrix multiplying dw.  Basis loops are the
        base generators at fiber 0 followed by one fiber loop per lattice
        generator; the fiber loop t ↦ t·g evaluates to fiber_mat·g.
        """
        tol = TOL.coeff if tol is None else tol
        res = beta.d().sup_norm()
        if res > tol:
            raise ValueError(f"representative is not closed: d-residual {res:.3e}")
        ev = loop_evaluations(beta)
        labels = list(sorted(ev))
        rows = [ev[l] for l in labels]
        fiber_mat = np.atleast_2d(np.asarray(fiber_mat, dtype=float))
        for i, g in enumerate(chart.lattice.basis):
            labels.append(f"fiber:{i}")
            rows.append(fiber_mat @ g)
        lats = (chart.lattice,) * len(labels) if quotient else None
        obj = cls(labels, rows, lats)
        obj.rep = {"base": beta, "fiber": fiber_mat}
        obj.closed_residual = res
        return obj

    # -- quotient arithmetic -------------------------------------------------

    @property
    def vdim(self) -> int:
        return self.evals.shape[1]

    def reduced(self) -> np.ndarray:
        """Evaluations with each row reduced modulo its ambiguity lattice."""
        rows = []
        for v, lat in zip(self.evals, self.lattices):
            rows.append(v if lat is None else lat.reduce(v))
        return np.array(rows)

    def quotient_norm(self) -> float:
        """Distance to the zero class: max over loops of the reduced
        evaluation in the sup norm."""
        return float(np.max(np.abs(self.reduced()), initial=0.0))

    def is_zero(self, tol: float | None = None) -> bool:
        tol = TOL.quad if tol is None else tol
        return self.quotient_norm() <= tol

    def distance_to(self, other: "CohClass1") -> float:
        """Quotient distance between two classes on the same loop basis."""
        if self.labels != other.labels:
            raise ValueError("classes live on different loop bases")
        out = 0.0
        for v, w, lat in zip(self.evals, other.evals, self.lattices):
            d = v - w
            if lat is not None:
                d = lat.reduce(d)
            out = max(out, float(np.max(np.abs(d), initial=0.0)))
        return out

    def same_class(self, other: "CohClass1", tol: float | None = None) -> bool:
        tol = TOL.quad if tol is None else tol
        return self.distance_to(other) <= tol

    def map_values(self, u) -> "CohClass1":
        """Push the V-coefficients through a linear map u (evaluations and,
        when present, the representative)."""
        u = np.atleast_2d(np.asarray(u.m if isinstance(u, LinearMap) else u,
                                     dtype=float))
        obj = CohClass1(self.labels, self.evals @ u.T, self.lattices)
        if self.rep is not None:
            fib = self.rep["fiber"]
            obj.rep = {"base": self.rep["base"].map_values(LinearMap(u)),
                       "fiber": None if fib is None else u @ fib}
            obj.closed_residual = self.closed_residual
        return obj

    def _combine(self, other: "CohClass1", sign: float) -> "CohClass1":
        if self.labels != other.labels:
            raise ValueError("classes live on different loop bases")
        obj = CohClass1(self.labels, self.evals + sign * other.evals,
                        self.lattices)
        if (self.rep is not None and other.rep is not None
                and (self.rep["fiber"] is None) == (other.rep["fiber"] is None)):
            base = self.rep["base"] + other.rep["base"] * sign
            fib = self.rep["fiber"]
            if fib is not None:
                fib = fib + sign * other.rep["fiber"]
            obj.rep = {"base": base, "fiber": fib}
            obj.closed_residual = base.d().sup_norm()
        return obj

    def __add__(self, other: "CohClass1") -> "CohClass1":
        return self._combine(other, 1.0)

    def __sub__(self, other: "CohClass1") -> "CohClass1":
        return self._combine(other, -1.0)

    def to_dict(self) -> dict:
        return {
            "schema": "cohclass/1",
            "labels": list(self.labels),
            "evals": self.evals.tolist(),
            "reduced": self.reduced().tolist(),
            "lattices": [None if lat is None else lat.to_dict()["generators"]
                         for lat in self.lattices],
            "closed_residual": (None if self.closed_residual is None
                                else float(self.closed_residual)),
        }

    def __repr__(self):
        return f"CohClass1(labels={self.labels}, quotient_norm={self.quotient_norm():.3e})"


# ---------------------------------------------------------------------------
# infinitesimal flux
# ---------------------------------------------------------------------------

def flux_eq_infinitesimal(eta: VectorField, gamma, chart: BundleChart,
                          tol: float | None = None) -> CohClass1:
    """Class of i_η ω − γ·θ for an equivariant pair (L_η ω = γ·ω).

    Base rows are i_η ω − γ·A with A the periodic potential (the winding
    monomial of a magnetic chart is killed by γ·R₀ = 0, itself implied by
    equivariance and re-checked); the fiber row is the constant −γ,
    evaluated on the lattice generators.  Vanishing of the class is exactly
    the equivariant-hamiltonian condition, so nonzero fiber evaluations
    −γ·g are honest obstruction data, not an error.
    """
    tol = TOL.quad if tol is None else tol
    gamma = _as_gamma(gamma, chart.vdim)
    gm = LinearMap(gamma)
    res = infinitesimal_equivariance_residual(eta, gm, chart.omega)
    if res > tol:
        raise ValueError(f"(η, γ) is not ω-equivariant: residual {res:.3e}")
    drift = float(np.max(np.abs(gamma @ chart.period_vector), initial=0.0))
    if drift > tol:
        raise ValueError(
            f"γ does not kill the curvature period: |γ·R₀| = {drift:.3e}")
    beta = chart.omega.interior(eta) - chart.periodic_potential_form().map_values(gm)
    return CohClass1.on_chart(chart, beta, -gamma, quotient=False, tol=tol)


# ---------------------------------------------------------------------------
# path flux on a chart
# ---------------------------------------------------------------------------

def _validated_nodes(dpath: DiffeoPath, gpath: GLPath, chart: BundleChart,
                     node_tol: float, degree: int | None):
    if dpath.base != chart.base:
        raise ValueError("path and chart bases differ")
    if gpath.steps != dpath.steps:
        raise ValueError("diffeomorphism and linear-group paths need the "
                         "same node grid")
    if gpath.mats[0].shape != (chart.vdim, chart.vdim):
        raise ValueError("linear-group path does not match the chart value "
                         "dimension")
    gens = chart.lattice.basis
    for k, node in enumerate(dpath.nodes):
        r = equivariance_residual(node, gpath.node(k), chart.omega)
        if r > node_tol:
            raise ValueError(
                f"node {k}: equivariance residual {r:.3e} above {node_tol:.1e}")
        for g in gens:
            if float(np.max(np.abs(gpath.mats[k] @ g - g))) > node_tol:
                raise ValueError(f"node {k}: u does not fix the period lattice")


def flux_eq_path(dpath: DiffeoPath, gpath: GLPath | None, chart: BundleChart,
                 node_tol: float | None = None, degree: int | None = None,
                 tol: float | None = None) -> CohClass1:
    """Path flux ∫₀¹ u_t·(i_{δˡφ_t}ω − δˡu_t·θ) dt, modulo Γ-integral classes.

    Every node (φ_k, u_k) is checked for φ_k^*ω = u_k·ω and for fixing the
    period lattice; each δˡu_k must kill the curvature period (so the
    integrand stays periodic on a magnetic chart).  Base rows are Simpson
    sums of u_k·(i_{η_k}ω − γ_k·A); the fiber row is −Σ w_k u_k γ_k, the
    quadrature form of 1 − u(1).
    """
    node_tol = 100.0 * TOL.ode if node_tol is None else node_tol
    if gpath is None:
        gpath = GLPath.constant_identity(chart.vdim, dpath.steps)
    _validated_nodes(dpath, gpath, chart, node_tol, degree)
    etas = dpath.log_derivative("left", degree=degree)
    gammas = gpath.log_derivative("left")
    r0 = chart.period_vector
    for k, gm in enumerate(gammas):
        if float(np.max(np.abs(gm @ r0), initial=0.0)) > node_tol:
            raise ValueError(
                f"node {k}: δˡu does not kill the curvature period")
    a_per = chart.periodic_potential_form()
    weights = _time_weights(len(dpath.nodes))
    acc = None
    fib = np.zeros((chart.vdim, chart.vdim))
    for k, w in enumerate(weights):
        u_k = gpath.mats[k]
        term = chart.omega.interior(etas[k]) - a_per.map_values(LinearMap(gammas[k]))
        term = term.map_values(LinearMap(u_k)) * float(w)
        acc = term if acc is None else acc + term
        fib = fib - w * (u_k @ gammas[k])
    tol = 100.0 * TOL.ode if tol is None else tol
    return CohClass1.on_chart(chart, acc, fib, quotient=True, tol=tol)


def flux_eq_exact_chart(phi, u, chart: BundleChart, degree: int | None = None,
                        tol: float | None = None) -> CohClass1:
    """Endpoint formula for a chart built from a potential (ω = dα):
    the path flux collapses to the class of φ^*α − u·α (base rows) with
    zero fiber row.  Oracle companion to `flux_eq_path` on trivial charts.
    """
    if chart.mode != "trivial":
        raise ValueError("the endpoint formula needs a chart with a global "
                         "potential")
    um = u if isinstance(u, LinearMap) else LinearMap(u)
    beta = pullback(chart.alpha, phi, degree=degree) - chart.alpha.map_values(um)
    tol = 100.0 * TOL.ode if tol is None else tol
    return CohClass1.on_chart(chart, beta, np.zeros((chart.vdim, chart.vdim)),
                              quotient=True, tol=tol)


# ---------------------------------------------------------------------------
# downstairs flux of an ω-invariant path
# ---------------------------------------------------------------------------

def flux_invariant_path(dpath: DiffeoPath, omega: VForm, lattice=None,
                        node_tol: float | None = None,
                        degree: int | None = None,
                        tol: float | None = None,
                        dual_tol: float | None = None) -> CohClass1:
    """Flux ∫₀¹ [i_{δφ_t}ω] dt of a path of ω-preserving maps, modulo the
    classes with values in the period lattice of ω.

    The integral is formed from the left and from the right logarithmic
    derivative; the two only agree up to exact forms pointwise in t, so the
    matching of their loop evaluations (kept on `dual_residual`, required
    < dual_tol) is a genuine cross-check, not a tautology.
    """
    node_tol = 100.0 * TOL.ode if node_tol is None else node_tol
    for k, node in enumerate(dpath.nodes):
        r = (pullback(omega, node, degree=degree) - omega).sup_norm()
        if r > node_tol:
            raise ValueError(
                f"node {k}: ω-invariance residual {r:.3e} above {node_tol:.1e}")
    if lattice is None:
        lattice = period_group(omega)
    weights = _time_weights(len(dpath.nodes))
    sums = {}
    for side in ("left", "right"):
        etas = dpath.log_derivative(side, degree=degree)
        acc = None
        for k, w in enumerate(weights):
            term = omega.interior(etas[k]) * float(w)
            acc = term if acc is None else acc + term
        sums[side] = acc
    tol = 100.0 * TOL.ode if tol is None else tol
    cls = CohClass1.on_manifold(sums["left"], lattice=lattice, tol=tol)
    ev_r = loop_evaluations(sums["right"])
    gap = max(float(np.max(np.abs(ev_r[l] - cls.evals[i])))
              for i, l in enumerate(cls.labels))
    cls.dual_residual = gap
    dual_tol = TOL.ode if dual_tol is None else dual_tol
    if gap > dual_tol:
        raise RuntimeError(
            f"left/right flux evaluations disagree by {gap:.3e} "
            f"(> {dual_tol:.1e}): refine the path grid")
    return cls


def elevation_residual(dpath: DiffeoPath, chart: BundleChart,
                       node_tol: float | None = None,
                       degree: int | None = None) -> float:
    """Gap in (flux on the chart) ∘ (inclusion u ≡ 1) = (pullback of the
    downstairs flux): max difference of base-loop evaluations plus the sup
    of the fiber evaluations (which pull back to zero)."""
    up = flux_eq_path(dpath, None, chart, node_tol=node_tol, degree=degree)
    down = flux_invariant_path(dpath, chart.omega, lattice=chart.lattice,
                               node_tol=node_tol, degree=degree)
    out = 0.0
    for lab, row in zip(down.labels, down.evals):
        i = up.labels.index(lab)
        out = max(out, float(np.max(np.abs(up.evals[i] - row))))
    for i, lab in enumerate(up.labels):
        if lab.startswith("fiber:"):
            out = max(out, float(np.max(np.abs(up.evals[i]), initial=0.0)))
    return out


# ---------------------------------------------------------------------------
# equivariant hamiltonian solve
# ---------------------------------------------------------------------------

def equi_hamiltonian_solve(eta: VectorField, gamma, chart: BundleChart,
                           budget: int | None = None,
                           tol: float | None = None) -> ChartFunction:
    """Solve i_η ω − γ·θ = dh in the chart function space h = h₀(x) − γ·w.

    The dw row matches by construction, so the content is a periodic
    primitive h₀ of β = i_η ω − γ·A, which exists exactly when the flux
    class vanishes: otherwise NotExact surfaces with the obstructing loop
    evaluations, and a primitive left with residual at the degree budget
    surfaces as BudgetExhausted — two distinct failure channels.  h is
    normalized to vanish at the origin of the zero fiber.
    """
    tol = TOL.quad if tol is None else tol
    gamma = _as_gamma(gamma, chart.vdim)
    gm = LinearMap(gamma)
    res = infinitesimal_equivariance_residual(eta, gm, chart.omega)
    if res > tol:
        raise ValueError(f"(η, γ) is not ω-equivariant: residual {res:.3e}")
    drift = float(np.max(np.abs(gamma @ chart.period_vector), initial=0.0))
    if drift > tol:
        raise ValueError(
            f"γ does not kill the curvature period: |γ·R₀| = {drift:.3e}")
    for g in chart.lattice.basis:
        if float(np.max(np.abs(gamma @ g))) > tol:
            raise ValueError("γ does not kill the period lattice: h₀(x) − γ·w "
                             "would not descend to the bundle")
    beta = chart.omega.interior(eta) - chart.periodic_potential_form().map_values(gm)
    f, info = primitive_of_closed_1form(beta, budget)
    h0 = CoverFunction.from_periodic(chart.base, f.comps[0])
    origin = [0.0] * chart.dim
    h0 = h0 + CoverFunction.constant(chart.base, -h0.evaluate(*origin))
    out = ChartFunction(h0, gamma)
    out.solve_info = info
    return out
