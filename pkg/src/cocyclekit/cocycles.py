"""Lie algebra 2-cocycles with module coefficients, and their verification.

The registry holds the builtin cocycles under stable string names:

    sigma0      σ₀(X,Y) = ∫₀¹ (X′Y″ − X″Y′) dx          ∈ ℝ
    sigma1      σ₁(X,Y) = X′Y″ − X″Y′                    ∈ F₁
    sigma2      σ₂(X,Y) = X′Y‴ − X‴Y′                    ∈ F₂
    barsigma0   σ̄₀(X,Y) = XY′ − X′Y                      ∈ F₀
    barsigma1   σ̄₁(X,Y) = XY″ − X″Y                      ∈ F₁
    barsigma2   σ̄₂(X,Y) = XY‴ − X‴Y                      ∈ F₂
    divergence  σ(X,Y) = (div X) d(div Y)                ∈ Ω¹(T²)/dΩ⁰(T²)
    gelfand-t2  σ(X,Y) = tr(dJ_X ∧ dJ_Y)                 ∈ Ω²(T²)
    heisenberg  σ(v,w) = v₁w₂ − v₂w₁ on abelian ℝ²       ∈ ℝ

F_λ is the density module over vector fields on the circle, with algebra
action ḃ_λ(X)f = Xf′ + λX′f and group action b_λ(φ)f = (φ′)^λ (f∘φ).
The Gelfand cocycle is evaluated on the flat frame bundle of T² along the
identity-frame section: the canonical lift X̃(x,g) = (X(x), J_X(x)·g) gives
L_X̃θ = g⁻¹(dJ_X)g for the flat connection θ = g⁻¹dg, so the trace descends
to tr(dJ_X ∧ dJ_Y) with J_X the Jacobian matrix of X.

Sign conventions are one flag on the algebra model.  "paper-negative" gives
pairs the bracket (−[X,Y]_std) together with the negated module action; the
two flips cancel in every identity checked here, so pass/fail is convention
independent (asserted in the test suite, not assumed).
"""

from __future__ import annotations

import numpy as np

from .config import RES
from .trigcalc import (
    TrigPoly, TrigPoly2, VectorField, VForm, project_circle,
    random_trigpoly, random_trigpoly2, random_vector_field,
)

__all__ = [
    "LieAlgebraModel",
    "ModuleModel",
    "Cocycle2",
    "REGISTRY_NAMES",
    "builtin_cocycle",
    "verify_ce2",
    "verify_descent",
    "density_action",
    "quotient_reduce",
]

CONVENTIONS = ("paper-negative", "standard")


# ---------------------------------------------------------------------------
# algebra and module models
# ---------------------------------------------------------------------------

class LieAlgebraModel:
    """A concrete Lie algebra to draw elements from and bracket in.

    kind ∈ {"VectorFieldsS1", "VectorFieldsT2", "AbelianRn"}.  The
    convention flag multiplies the standard bracket by −1 ("paper-negative",
    the default); the consistent module action carries the same sign, which
    `verify_ce2` and `verify_descent` apply for you.
    """

    def __init__(self, kind: str, convention: str = "paper-negative", n: int = 2):
        if kind not in ("VectorFieldsS1", "VectorFieldsT2", "AbelianRn"):
            raise ValueError(f"unknown algebra kind {kind!r}")
        if convention not in CONVENTIONS:
            raise ValueError(f"unknown bracket convention {convention!r}")
        self.kind = kind
        self.convention = convention
        self.n = n

    @property
    def sign(self) -> float:
        return -1.0 if self.convention == "paper-negative" else 1.0

    def bracket(self, x, y):
        if self.kind == "AbelianRn":
            return np.zeros(self.n)
        return x.bracket_std(y) * self.sign

    def random_element(self, rng, degree: int = 4, scale: float = 0.1):
        if self.kind == "VectorFieldsS1":
            return random_vector_field(rng, "S1", degree=degree, scale=scale)
        if self.kind == "VectorFieldsT2":
            return random_vector_field(rng, "T2", degree=degree, scale=scale)
        return rng.uniform(-1.0, 1.0, self.n)

    def zero_element(self):
        if self.kind == "VectorFieldsS1":
            return VectorField.on_circle(TrigPoly.zero())
        if self.kind == "VectorFieldsT2":
            return VectorField.on_torus(TrigPoly2.zero(), TrigPoly2.zero())
        return np.zeros(self.n)

    def jacobi_residual(self, x, y, z) -> float:
        b = self.bracket
        r = b(b(x, y), z) + b(b(y, z), x) + b(b(z, x), y)
        return _norm(r)

    def __repr__(self):
        return f"LieAlgebraModel({self.kind}, {self.convention})"


class ModuleModel:
    """Coefficient module: element type, algebra action, canonical form.

    kinds and elements:
      Density(λ)            TrigPoly on S¹       ḃ_λ(X)f = Xf′ + λX′f
      Forms(k, base)        VForm of degree k    L_X (Cartan)
      TrivialRn(n)          float / ndarray      zero action
      FormsModuloExact(T2)  VForm of degree 1    L_X, then canonical rep

    `act` always returns the printed (standard-convention) formulas; the
    verifiers fold in the algebra model's sign.  `reduce` maps an element to
    its canonical representative (identity except in the quotient module,
    where the exact part is projected away mode by mode).
    """

    def __init__(self, kind: str, weight: float | None = None,
                 form_degree: int | None = None, base: str = "T2", n: int = 1):
        if kind not in ("Density", "Forms", "TrivialRn", "FormsModuloExact"):
            raise ValueError(f"unknown module kind {kind!r}")
        self.kind = kind
        self.weight = weight
        self.form_degree = form_degree
        self.base = base
        self.n = n

    # -- constructors, spelled like the math -------------------------------

    @staticmethod
    def density(weight: float) -> "ModuleModel":
        return ModuleModel("Density", weight=weight)

    @staticmethod
    def forms(degree: int, base: str) -> "ModuleModel":
        return ModuleModel("Forms", form_degree=degree, base=base)

    @staticmethod
    def trivial(n: int = 1) -> "ModuleModel":
        return ModuleModel("TrivialRn", n=n)

    @staticmethod
    def forms_modulo_exact(base: str = "T2") -> "ModuleModel":
        return ModuleModel("FormsModuloExact", base=base)

    # -- module structure ---------------------------------------------------

    def act(self, x, v):
        """Algebra action of x on module element v (printed formulas)."""
        if self.kind == "TrivialRn":
            return v * 0.0
        if self.kind == "Density":
            f = x.comps[0] if isinstance(x, VectorField) else x
            return f * v.derivative() + (f.derivative() * v) * self.weight
        if self.kind == "Forms":
            return v.lie(x)
        return quotient_reduce(v.lie(x))

    def group_act(self, phi, v):
        """Group action where the model provides one (densities only)."""
        if self.kind == "Density":
            return density_action(self.weight, phi, v)
        raise NotImplementedError(f"no group action wired for {self.kind}")

    def reduce(self, v):
        if self.kind == "FormsModuloExact":
            return quotient_reduce(v)
        return v

    def zero(self):
        if self.kind == "Density":
            return TrigPoly.zero()
        if self.kind == "Forms":
            return VForm.zero(self.base, self.form_degree)
        if self.kind == "FormsModuloExact":
            return VForm.zero(self.base, 1)
        return 0.0 if self.n == 1 else np.zeros(self.n)

    def random_element(self, rng, degree: int = 4, scale: float = 0.1):
        if self.kind == "Density":
            return random_trigpoly(rng, degree, scale)
        if self.kind in ("Forms", "FormsModuloExact"):
            deg = 1 if self.kind == "FormsModuloExact" else self.form_degree
            size = {0: 1, 1: 2, 2: 1}[deg]
            rows = [[random_trigpoly2(rng, (degree, degree), scale)]
                    for _ in range(size)]
            return self.reduce(VForm(self.base, deg, rows))
        return rng.uniform(-1.0, 1.0, self.n) if self.n > 1 else float(rng.uniform(-1, 1))

    def homomorphism_residual(self, algebra: LieAlgebraModel, x, y, v) -> float:
        """|[x,y]·v − (x·(y·v) − y·(x·v))| under the paired convention."""
        s = algebra.sign
        lhs = self.act(algebra.bracket(x, y), v) * s
        rhs = (self.act(x, self.act(y, v) * s) * s
               - self.act(y, self.act(x, v) * s) * s)
        return _norm(self.reduce(lhs - rhs))

    def __repr__(self):
        bits = {"Density": f"λ={self.weight}",
                "Forms": f"Ω^{self.form_degree}({self.base})",
                "TrivialRn": f"R^{self.n}",
                "FormsModuloExact": f"Ω¹({self.base})/dΩ⁰"}[self.kind]
        return f"ModuleModel({self.kind}: {bits})"


def _norm(v) -> float:
    if isinstance(v, (int, float)):
        return abs(float(v))
    if isinstance(v, np.ndarray):
        return float(np.max(np.abs(v))) if v.size else 0.0
    return float(v.sup_norm())


# ---------------------------------------------------------------------------
# cocycles
# ---------------------------------------------------------------------------

class Cocycle2:
    """Bilinear antisymmetric map 𝔤×𝔤 → module, values in canonical form."""

    def __init__(self, name: str, algebra: LieAlgebraModel, module: ModuleModel,
                 evaluate):
        self.name = name
        self.algebra = algebra
        self.module = module
        self._evaluate = evaluate

    def __call__(self, x, y):
        return self.module.reduce(self._evaluate(x, y))

    def perturbed(self, other_evaluate, eps: float) -> "Cocycle2":
        """σ + ε·τ for a raw bilinear map τ — the negative-control knob."""
        def ev(x, y, base=self._evaluate, tau=other_evaluate, e=eps):
            return base(x, y) + tau(x, y) * e
        return Cocycle2(f"{self.name}+perturbation", self.algebra, self.module, ev)

    def __repr__(self):
        return f"Cocycle2({self.name}: {self.algebra.kind} -> {self.module})"


# ---- registry -------------------------------------------------------------

def _d(x: VectorField, k: int) -> TrigPoly:
    p = x.comps[0]
    for _ in range(k):
        p = p.derivative()
    return p


def _density_cocycle(name, weight, i, j):
    """σ(X,Y) = X⁽ⁱ⁾Y⁽ʲ⁾ − X⁽ʲ⁾Y⁽ⁱ⁾ with values in F_weight."""
    def ev(x, y, i=i, j=j):
        return _d(x, i) * _d(y, j) - _d(x, j) * _d(y, i)
    return Cocycle2(name, LieAlgebraModel("VectorFieldsS1"),
                    ModuleModel.density(weight), ev)


def _sigma0():
    def ev(x, y):
        return float((_d(x, 1) * _d(y, 2) - _d(x, 2) * _d(y, 1)).mean)
    return Cocycle2("sigma0", LieAlgebraModel("VectorFieldsS1"),
                    ModuleModel.trivial(1), ev)


def _divergence():
    def ev(x, y):
        u = x.divergence()
        v = y.divergence()
        return VForm.one_form("T2", u * v.partial(0), u * v.partial(1))
    return Cocycle2("divergence", LieAlgebraModel("VectorFieldsT2"),
                    ModuleModel.forms_modulo_exact("T2"), ev)


def _gelfand_t2():
    # tr(dJ_X ∧ dJ_Y) = Σ_{ij} d(∂_j Xⁱ) ∧ d(∂_i Yʲ), an honest 2-form on T²
    def ev(x, y):
        acc = TrigPoly2.zero()
        for i in range(2):
            for j in range(2):
                a = x.comps[i].partial(j)
                b = y.comps[j].partial(i)
                acc = acc + (a.partial(0) * b.partial(1)
                             - a.partial(1) * b.partial(0))
        return VForm.area_form(acc)
    return Cocycle2("gelfand-t2", LieAlgebraModel("VectorFieldsT2"),
                    ModuleModel.forms(2, "T2"), ev)


def _heisenberg():
    def ev(v, w):
        return float(v[0] * w[1] - v[1] * w[0])
    return Cocycle2("heisenberg", LieAlgebraModel("AbelianRn", n=2),
                    ModuleModel.trivial(1), ev)


_REGISTRY = {
    "sigma0": _sigma0,
    "sigma1": lambda: _density_cocycle("sigma1", 1, 1, 2),
    "sigma2": lambda: _density_cocycle("sigma2", 2, 1, 3),
    "barsigma0": lambda: _density_cocycle("barsigma0", 0, 0, 1),
    "barsigma1": lambda: _density_cocycle("barsigma1", 1, 0, 2),
    "barsigma2": lambda: _density_cocycle("barsigma2", 2, 0, 3),
    "divergence": _divergence,
    "gelfand-t2": _gelfand_t2,
    "heisenberg": _heisenberg,
}

REGISTRY_NAMES = tuple(_REGISTRY)


def builtin_cocycle(name: str) -> Cocycle2:
    if name not in _REGISTRY:
        raise KeyError(f"unknown cocycle {name!r}; registry: {', '.join(REGISTRY_NAMES)}")
    return _REGISTRY[name]()


# ---------------------------------------------------------------------------
# Chevalley-Eilenberg verification
# ---------------------------------------------------------------------------

def ce2_residual(sigma: Cocycle2, x, y, z) -> float:
    """|dσ(x,y,z)| for one triple.

    dσ(X,Y,Z) =  X·σ(Y,Z) − Y·σ(X,Z) + Z·σ(X,Y)
               − σ([X,Y],Z) + σ([X,Z],Y) − σ([Y,Z],X)

    with the action and the bracket taken in the algebra model's paired
    convention (both flip together, so the residual magnitude does not
    depend on the flag).
    """
    mod, alg = sigma.module, sigma.algebra
    s = alg.sign
    act = mod.act
    action_part = (act(x, sigma(y, z)) * s - act(y, sigma(x, z)) * s
                   + act(z, sigma(x, y)) * s)
    bracket_part = (sigma(alg.bracket(x, y), z) - sigma(alg.bracket(x, z), y)
                    + sigma(alg.bracket(y, z), x))
    return _norm(mod.reduce(action_part - bracket_part))


def verify_ce2(sigma: Cocycle2, trials: int = 100, degree: int = 4,
               scale: float = 0.1, rng=None) -> float:
    """Max CE 2-cocycle residual over random triples; contract < τ_quad."""
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0.0
    for _ in range(trials):
        x = sigma.algebra.random_element(rng, degree=degree, scale=scale)
        y = sigma.algebra.random_element(rng, degree=degree, scale=scale)
        z = sigma.algebra.random_element(rng, degree=degree, scale=scale)
        worst = max(worst, ce2_residual(sigma, x, y, z))
    return worst


def verify_descent(sigma: Cocycle2, subalgebra, trials: int = 20,
                   degree: int = 4, scale: float = 0.1, rng=None) -> dict:
    """Residuals of the two descent conditions for a subalgebra 𝔥.

    kernel:        σ(Z, X) = 0                          for Z ∈ 𝔥
    equivariance:  σ([Z,X],Y) + σ(X,[Z,Y]) = ḃ(Z)·σ(X,Y) for Z ∈ 𝔥

    `subalgebra` is a spanning list of algebra elements.  Returns
    {"kernel": max residual, "equivariance": max residual}; the module's
    own action supplies ḃ, with the convention sign folded in as in
    `verify_ce2`.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    alg, mod = sigma.algebra, sigma.module
    s = alg.sign
    kernel = 0.0
    equiv = 0.0
    for _ in range(trials):
        x = alg.random_element(rng, degree=degree, scale=scale)
        y = alg.random_element(rng, degree=degree, scale=scale)
        for z in subalgebra:
            kernel = max(kernel, _norm(sigma(z, x)))
            lhs = sigma(alg.bracket(z, x), y) + sigma(x, alg.bracket(z, y))
            rhs = mod.act(z, sigma(x, y)) * s
            equiv = max(equiv, _norm(mod.reduce(lhs - rhs)))
    return {"kernel": kernel, "equivariance": equiv}


# ---------------------------------------------------------------------------
# density module actions on the circle
# ---------------------------------------------------------------------------

def density_action(weight: float, x_or_phi, f: TrigPoly) -> TrigPoly:
    """b_λ(φ)f = (φ′)^λ (f∘φ), or ḃ_λ(X)f = Xf′ + λX′f.

    Dispatches on the second argument: a VectorField or bare TrigPoly gives
    the algebra action (exact in the trig-poly ring); an object with a lift
    (`.p` displacement, i.e. a circle diffeomorphism) gives the group
    action, computed by sampling and projecting onto the degree budget.
    The group action composes as b_λ(φ∘ψ) = b_λ(ψ)∘b_λ(φ) — a right
    action, matching (d/dt) b_λ(φ_t)f = b_λ(φ_t)(ḃ_λ(δʳφ_t)f), which at
    t = 0 is the plain compatibility ḃ_λ(X)f.
    """
    if isinstance(x_or_phi, (VectorField, TrigPoly)):
        p = x_or_phi.comps[0] if isinstance(x_or_phi, VectorField) else x_or_phi
        return p * f.derivative() + (p.derivative() * f) * weight
    phi = x_or_phi
    if not hasattr(phi, "p"):
        raise TypeError("expected a vector field, trig poly, or circle diffeomorphism")
    degree = RES.circle_degree
    m = RES.oversample * (2 * degree + 1)
    xs = np.arange(m) / m
    dphi = 1.0 + phi.p.derivative()(xs)
    if np.min(dphi) <= 0:
        raise ValueError("not an orientation-preserving diffeomorphism")
    vals = dphi ** weight * f(phi(xs))
    return project_circle(vals, degree).trimmed(1e-15)


# ---------------------------------------------------------------------------
# the 1-form quotient on the torus
# ---------------------------------------------------------------------------

def quotient_reduce(beta: VForm) -> VForm:
    """Canonical representative of a T² 1-form in Ω¹/dΩ⁰.

    Mode by mode, the exact part of (P̂ₖ, Q̂ₖ) is its projection onto the
    gradient direction (ik₁, ik₂); removing it leaves the divergence-free
    part plus the harmonic zero mode.  Two 1-forms are equal in the
    quotient iff their canonical representatives agree coefficientwise
    (equivalently: their difference is closed with vanishing periods over
    both homology generators).
    """
    if beta.base != "T2" or beta.degree != 1:
        raise ValueError("quotient_reduce expects a 1-form on T2")
    if beta.vdim != 1:
        raise ValueError("scalar-valued 1-forms only")
    p, q = beta.comps[0][0], beta.comps[1][0]
    n1 = max(p.degrees[0], q.degrees[0])
    n2 = max(p.degrees[1], q.degrees[1])
    pc = p.padded((n1, n2)).c.copy()
    qc = q.padded((n1, n2)).c.copy()
    k1 = np.arange(-n1, n1 + 1)[:, None]
    k2 = np.arange(-n2, n2 + 1)[None, :]
    ksq = k1 ** 2 + k2 ** 2
    safe = np.where(ksq == 0, 1, ksq)
    # component of (P,Q) along the mode's gradient direction (k1, k2)
    grad = np.where(ksq == 0, 0.0, (pc * k1 + qc * k2) / safe)
    return VForm.one_form("T2",
                          TrigPoly2(pc - grad * k1).trimmed(1e-16),
                          TrigPoly2(qc - grad * k2).trimmed(1e-16))
