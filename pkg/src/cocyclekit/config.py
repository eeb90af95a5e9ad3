"""Central numerical configuration: tolerances and resolution budgets.

Every comparison in the package routes through a named tolerance so that the
whole suite can be tightened or loosened coherently (see ``Tolerances.scaled``).
The defaults are calibrated for trig polynomials of degree <= ~8 with O(1)
coefficients in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """Named tolerances used across the package.

    coeff : exact-identity residuals (pure coefficient arithmetic)
    quad  : quadrature-backed identities (Gauss panels, grid sup norms)
    ode   : time-discretized quantities (RK4 flows, finite-difference
            logarithmic derivatives, Simpson integrals along paths)
    mono  : lower bound for derivative of a circle/torus diffeomorphism
            (monotonicity / orientation margin)
    inv   : lower bound for |det| of an invertible linear map
    disc  : scale under which lattice generators are treated as zero, and
            the resolution used by discreteness certificates
    """

    coeff: float = 1e-12
    quad: float = 1e-8
    ode: float = 1e-7
    mono: float = 1e-6
    inv: float = 1e-12
    disc: float = 1e-9

    def scaled(self, factor: float) -> "Tolerances":
        """Return a copy with every tolerance multiplied by ``factor``.

        Lower bounds (mono, inv, disc) are *divided* only in the sense that
        they are left untouched: scaling is meant to relax/verify residual
        comparisons, not to change what counts as a degenerate map.
        """
        return replace(
            self,
            coeff=self.coeff * factor,
            quad=self.quad * factor,
            ode=self.ode * factor,
        )


@dataclass(frozen=True)
class Resolution:
    """Degree and grid budgets for operations that are not closed on
    trig polynomials (composition, inversion, division).

    circle_degree : Fourier degree kept after composing/inverting maps of S^1
    torus_degree  : per-axis degree kept on T^2
    oversample    : extra factor on sampling grids beyond the Nyquist 2N+1
    quad_order    : Gauss-Legendre nodes per panel for curve integrals
    quad_panels   : default number of panels per curve segment
    ode_steps     : default number of RK4 steps for transport / flows
    fd_step       : step for finite-difference checks on constructed group laws
    fourier_budget: max degree for Fourier primitive solves (admissibility)
    """

    circle_degree: int = 224
    torus_degree: int = 24
    oversample: int = 2
    quad_order: int = 16
    quad_panels: int = 8
    ode_steps: int = 200
    fd_step: float = 1e-3
    fourier_budget: int = 16


TOL = Tolerances()
RES = Resolution()
