import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cocyclekit.config import TOL
from cocyclekit.trigcalc import (
    TrigPoly, TrigPoly2, VForm, VectorField, LinearMap,
    project_circle, project_torus, interior_and_lie, integrate,
    integrate_over_curve, integrate_over_chain, wedge, divide,
    polyline_loop, trig_curve, patch_chain, cone_chain,
    primitive_of_closed_1form, loop_evaluations, NotExact,
    random_trigpoly, random_trigpoly2, random_vector_field,
    dumps, loads,
)
from cocyclekit.planecalc import Poly2, PlaneVForm, plane_primitive


# ---------------------------------------------------------------------------
# products, degrees, projection
# ---------------------------------------------------------------------------

def test_product_to_sum_exact():
    # cos(2pi x) * cos(2pi x) = 1/2 + cos(4pi x)/2  (frozen by hand)
    c1 = TrigPoly.harmonic(1, cos_coeff=1.0)
    p = c1 * c1
    assert p.degree == 2
    assert abs(p.a0 - 0.5) < TOL.coeff
    assert abs(p.a[1] - 0.5) < TOL.coeff
    assert abs(p.a[0]) < TOL.coeff and np.max(np.abs(p.b)) < TOL.coeff
    # sin * cos = sin(4pi x)/2
    s1 = TrigPoly.harmonic(1, sin_coeff=1.0)
    q = s1 * c1
    assert abs(q.b[1] - 0.5) < TOL.coeff and abs(q.a0) < TOL.coeff


def test_product_degree_bookkeeping():
    rng = np.random.default_rng(3)
    f = random_trigpoly(rng, 3, scale=1.0, decay=0.0)
    g = random_trigpoly(rng, 5, scale=1.0, decay=0.0)
    assert (f * g).degree == 8
    F = random_trigpoly2(rng, (2, 3), scale=1.0, decay=0.0)
    G = random_trigpoly2(rng, (1, 4), scale=1.0, decay=0.0)
    assert (F * G).degrees == (3, 7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_product_pointwise(seed):
    rng = np.random.default_rng(seed)
    f = random_trigpoly(rng, int(rng.integers(0, 7)), scale=1.0, decay=0.0)
    g = random_trigpoly(rng, int(rng.integers(0, 7)), scale=1.0, decay=0.0)
    x = rng.uniform(0, 1, 23)
    assert np.max(np.abs((f * g)(x) - f(x) * g(x))) < 1e-11


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**9))
def test_projection_roundtrip(seed):
    rng = np.random.default_rng(seed)
    f = random_trigpoly(rng, 6, scale=1.0, decay=0.0)
    g = project_circle(f.sample(13), 6)
    assert (f - g).sup_norm() < 1e-13
    F = random_trigpoly2(rng, (3, 2), scale=1.0, decay=0.0)
    G = project_torus(F.sample(7, 5), (3, 2))
    assert np.max(np.abs(F.c - G.c)) < 1e-13


def test_sampling_below_nyquist_raises():
    f = TrigPoly.harmonic(4, cos_coeff=1.0)
    with pytest.raises(ValueError):
        project_circle(f.sample(16), 8)  # 16 < 2*8+1


def test_derivative_and_primitive():
    f = TrigPoly(0.0, [0.0, 2.0], [1.0, 0.0])  # sin(2pi x) + 2 cos(4pi x)
    df = f.derivative()
    x = np.linspace(0, 1, 101)
    expected = 2 * np.pi * np.cos(2 * np.pi * x) - 8 * np.pi * np.sin(4 * np.pi * x)
    assert np.max(np.abs(df(x) - expected)) < 1e-12
    back = df.periodic_primitive()
    assert (back - f).sup_norm() < TOL.coeff


# ---------------------------------------------------------------------------
# exterior calculus invariants
# ---------------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**9))
def test_dd_zero(seed):
    rng = np.random.default_rng(seed)
    scale = max(1.0, random_trigpoly(rng, 4, 1.0, 0.0).sup_norm())
    f1 = VForm.function("S1", [random_trigpoly(rng, 5, 1.0, 0.0)])
    assert f1.d().d().sup_norm() / scale < 1e-12
    f2 = VForm.function("T2", [random_trigpoly2(rng, (3, 3), 1.0, 0.0),
                               random_trigpoly2(rng, (3, 3), 1.0, 0.0)])
    rel = f2.d().d().sup_norm() / max(1.0, f2.d().sup_norm())
    assert rel < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**9))
def test_cartan_vs_direct_leibniz_s1(seed):
    # L_X (f dx) = (X f' + f X') dx is the hand-derived comparison formula
    rng = np.random.default_rng(seed)
    X = random_vector_field(rng, "S1", 4, scale=0.5, decay=0.0)
    f = random_trigpoly(rng, 4, scale=1.0, decay=0.0)
    form = VForm.one_form("S1", [f])
    _, lx = interior_and_lie(X, form)
    direct = X.comps[0] * f.derivative() + f * X.comps[0].derivative()
    assert (lx.comps[0][0] - direct).sup_norm() < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**9))
def test_cartan_vs_direct_t2(seed):
    # 0-forms: L_X f = X(f); 2-forms: L_X (R dx^dy) = (X(R) + R div X) dx^dy
    rng = np.random.default_rng(seed)
    X = random_vector_field(rng, "T2", 3, scale=0.5, decay=0.0)
    R = random_trigpoly2(rng, (3, 3), scale=1.0, decay=0.0)
    f0 = VForm.function("T2", [R])
    assert (f0.lie(X).comps[0][0] - X.apply_to(R)).sup_norm() < 1e-10
    om = VForm.area_form(R)
    direct = X.apply_to(R) + R * X.divergence()
    assert (om.lie(X).comps[0][0] - direct).sup_norm() < 1e-10


def test_interior_on_2form():
    # i_X (R dx^dy) = R (X1 dy - X2 dx)
    rng = np.random.default_rng(11)
    X = random_vector_field(rng, "T2", 2, scale=1.0, decay=0.0)
    R = random_trigpoly2(rng, (2, 2), scale=1.0, decay=0.0)
    ix = VForm.area_form(R).interior(X)
    assert (ix.comps[0][0] - (-1.0) * (X.comps[1] * R)).sup_norm() < 1e-12
    assert (ix.comps[1][0] - X.comps[0] * R).sup_norm() < 1e-12


def test_s1_two_forms_structurally_zero():
    f = VForm.one_form("S1", [TrigPoly.harmonic(2, 1.0)])
    z = f.d()
    assert z.is_structural_zero and z.degree == 2
    assert z.sup_norm() == 0.0
    assert np.allclose(z.full_period_integral(), 0.0)


def test_map_values():
    u = LinearMap([[0.0, -1.0], [1.0, 0.0]])
    f = VForm.function("S1", [TrigPoly.constant(2.0), TrigPoly.constant(5.0)])
    g = f.map_values(u)
    assert abs(g.comps[0][0].a0 + 5.0) < 1e-15
    assert abs(g.comps[0][1].a0 - 2.0) < 1e-15
    with pytest.raises(ValueError):
        LinearMap(np.zeros((2, 2))).inverse()


# ---------------------------------------------------------------------------
# integration: full periods, loops, chains
# ---------------------------------------------------------------------------

def test_full_period_integrals_exact():
    f = TrigPoly(0.7, [0.3, 0.1], [0.2])
    assert integrate(VForm.one_form("S1", [f]), "S1")[0] == pytest.approx(0.7, abs=1e-15)
    F = TrigPoly2.from_mode(0, 0, -1.25) + TrigPoly2.from_mode(2, 1, 0.3 + 0.1j)
    assert integrate(VForm.area_form(F), "T2")[0] == pytest.approx(-1.25, abs=1e-15)


def test_square_loop_y_dx():
    # boundary of [0, 1/4]^2, integrand y dx; frozen value -1/16
    ydx = PlaneVForm.one_form(Poly2.coordinate(1), Poly2.zero())
    sq = polyline_loop([[0, 0], [0.25, 0], [0.25, 0.25], [0, 0.25]])
    val = integrate(ydx, sq)
    assert abs(val[0] - (-1.0 / 16.0)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**9))
def test_stokes_loop_vs_chain(seed):
    rng = np.random.default_rng(seed)
    al = VForm.one_form(
        "T2",
        [random_trigpoly2(rng, (3, 3), scale=0.5, decay=1.0)],
        [random_trigpoly2(rng, (3, 3), scale=0.5, decay=1.0)],
    )
    center = rng.uniform(0.2, 0.8, 2)
    wob = trig_curve(
        [0.0, 0.0],
        [TrigPoly(center[0], [rng.uniform(0.02, 0.08)], [0.0]),
         TrigPoly(center[1], [0.0], [rng.uniform(0.02, 0.08)])],
    )
    lhs = integrate_over_curve(al, wob, panels=12)
    rhs = integrate_over_chain(al.d(), cone_chain(wob, center), panels=12)
    assert np.max(np.abs(lhs - rhs)) < TOL.quad


def test_loop_refinement_stability():
    # doubling panels moves the value by less than tau_quad
    rng = np.random.default_rng(5)
    al = VForm.one_form("T2",
                        [random_trigpoly2(rng, (4, 4), scale=0.5, decay=1.0)],
                        [random_trigpoly2(rng, (4, 4), scale=0.5, decay=1.0)])
    loop = polyline_loop([[0.1, 0.1], [0.6, 0.2], [0.5, 0.7], [0.15, 0.55]])
    v1 = integrate_over_curve(al, loop, panels=8)
    v2 = integrate_over_curve(al, loop, panels=16)
    assert np.max(np.abs(v1 - v2)) < TOL.quad


def test_wedge_antisymmetry():
    rng = np.random.default_rng(7)
    a = VForm.one_form("T2", [random_trigpoly2(rng, (2, 2), 1.0, 0.0)],
                       [random_trigpoly2(rng, (2, 2), 1.0, 0.0)])
    b = VForm.one_form("T2", [random_trigpoly2(rng, (2, 2), 1.0, 0.0)],
                       [random_trigpoly2(rng, (2, 2), 1.0, 0.0)])
    assert (wedge(a, b) + wedge(b, a)).sup_norm() < 1e-12


# ---------------------------------------------------------------------------
# primitives of closed 1-forms
# ---------------------------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**9))
def test_primitive_roundtrip(seed):
    rng = np.random.default_rng(seed)
    base = "S1" if seed % 2 else "T2"
    if base == "S1":
        f = VForm.function("S1", [random_trigpoly(rng, 5, 1.0, 0.0)])
    else:
        f = VForm.function("T2", [random_trigpoly2(rng, (3, 3), 1.0, 0.0)])
    g, info = primitive_of_closed_1form(f.d())
    assert info["residual"] < TOL.quad
    # primitives agree with the input up to the constant
    diff = g - f
    if base == "S1":
        assert (diff.comps[0][0] - diff.comps[0][0].mean).sup_norm() < 1e-10
    else:
        assert (diff.comps[0][0] - diff.comps[0][0].mean).sup_norm() < 1e-10


def test_primitive_obstruction():
    dy = VForm.one_form("T2", [TrigPoly2.zero()], [TrigPoly2.constant(1.0)])
    with pytest.raises(NotExact) as exc:
        primitive_of_closed_1form(dy)
    ev = exc.value.loop_evals
    assert abs(ev["base_y"][0] - 1.0) < 1e-14 and abs(ev["base_x"][0]) < 1e-14


def test_loop_evaluations_mixed_form():
    # alpha = dx + 2 dy + exact junk: evaluations (1, 2)
    junk = VForm.function("T2", [random_trigpoly2(np.random.default_rng(8), (2, 2), 1.0, 0.0)]).d()
    al = VForm.one_form("T2", [TrigPoly2.constant(1.0)], [TrigPoly2.constant(2.0)]) + junk
    ev = loop_evaluations(al)
    assert abs(ev["base_x"][0] - 1.0) < 1e-12
    assert abs(ev["base_y"][0] - 2.0) < 1e-12


# ---------------------------------------------------------------------------
# division, serialization, misc
# ---------------------------------------------------------------------------

def test_divide_reconstructs():
    rng = np.random.default_rng(9)
    num = random_trigpoly2(rng, (2, 2), scale=0.1)
    den = TrigPoly2.from_mode(1, 0, 0.1) + 1.0
    q, res = divide(num, den, (16, 16))
    assert res < 1e-12
    with pytest.raises(ZeroDivisionError):
        divide(num, TrigPoly2.from_mode(1, 0, 0.5) + 1.0, (16, 16))  # 1+cos touches 0


def test_json_roundtrip():
    rng = np.random.default_rng(10)
    f = random_trigpoly(rng, 4)
    assert (loads(dumps(f)) - f).sup_norm() == 0.0
    F = random_trigpoly2(rng, (2, 3))
    assert np.max(np.abs(loads(dumps(F)).c - F.c)) == 0.0
    form = VForm.one_form("T2", [F], [random_trigpoly2(rng, (2, 3))])
    back = loads(dumps(form))
    assert (back - form).sup_norm() == 0.0
    d = f.to_dict()
    d["degree"] = 17
    with pytest.raises(ValueError):
        TrigPoly.from_dict(d)


def test_plane_primitive_and_pullback():
    f = Poly2([[0.0, 3.0], [0.0, 0.0], [0.0, 1.0]])  # 3y + x^2 y
    beta = PlaneVForm.function([f]).d()
    g = plane_primitive(beta, (0.5, -1.0))
    assert abs(g.comps[0][0](0.5, -1.0)) < 1e-14
    assert (g.d() - beta).sup_norm(radius=2.0) < 1e-12
    al = PlaneVForm.one_form(Poly2.zero(), Poly2.coordinate(0))  # x dy
    pb = al.pullback_translation(0.7, -0.3)
    assert abs(pb.comps[1][0](0.0, 0.0) - 0.7) < 1e-15
