"""Ground-truth scattering computations on the real line.

Everything in this module works directly with the coupled first-order
system on R -- no turning points, no asymptotic matching -- so that the
complex-plane machinery elsewhere in the package can be played against
an independent reference.  It provides high-order integration of the
2x2 system, the analytic coefficient ``a(lam)`` whose upper-half-plane
zeros are the eigenvalues, argument-principle certification of each
root, norming constants, and the reflection coefficient, the latter two
each with a second, scalar-equation route for cross-validation.

Conventions.  The left Jost solution decays as x -> -inf and is
normalized there to a unit-amplitude exponential; the right Jost
solution mirrors it at +inf.  All one-sided solves integrate the
phase-referenced column (the raw column times ``exp(s*i*lam*x/eps)``
for the sign ``s`` that freezes its own exponential), which keeps every
stored quantity O(1) even deep in the upper half-plane.
"""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import (
    NewtonDivergence,
    RootCountMismatch,
    StepUnderflow,
    WindingAmbiguous,
)
from .potential import DEFAULT, Potential, Rectangle

__all__ = [
    "EPS_FLOOR",
    "FrameSolution",
    "L_DEFAULT",
    "OracleEigenvalue",
    "ScatteringData",
    "direct_eigenvalues",
    "gauge_u_from_v",
    "gauge_v_from_u",
    "integrate_zs",
    "norming_constant_direct",
    "reflection_coefficient",
    "scattering_data",
    "sigma_phase",
    "transmission_a",
]

L_DEFAULT = 10.0
_L_MIN = 8.0
EPS_FLOOR = 0.02
_RTOL = 1e-12
_ATOL = 1e-14
# exp() arguments beyond this overflow a double; raw-frame transits must
# stay under it, phase-referenced solves never get near it.
_EXP_GUARD = 650.0


def _check_core(eps: float, L: float) -> None:
    if not eps >= EPS_FLOOR:
        raise ValueError(
            f"eps={eps} below the supported floor {EPS_FLOOR}; the"
            " oscillation-resolving step cap makes smaller eps impractical"
        )
    if not L >= _L_MIN:
        raise ValueError(f"L={L} too small: need L >= {_L_MIN} so the tail is below 1e-6")


def _real_nonzero(lam) -> float:
    lam = complex(lam)
    if lam.imag != 0.0:
        raise ValueError(f"lam={lam} must be real")
    if lam.real == 0.0:
        raise ValueError("lam=0 is excluded (the reflection formulas degenerate there)")
    return lam.real


def _pmap(fn: Callable, items: Iterable) -> list:
    """Map preserving order; threaded when ZS_THREADS asks for it.

    Each item is independent and the result order is the input order, so
    the threaded path is exactly as deterministic as the serial one.
    """
    items = list(items)
    workers = int(os.environ.get("ZS_THREADS", "0") or 0)
    if workers <= 1 or len(items) < 4:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# -- right-hand sides -------------------------------------------------------


def _rhs_u(lam: complex, eps: float, pot: Potential, shift: float):
    """Coupled system, phase-referenced by exp(shift * i*lam*x/eps)."""
    amp = pot.amp_scale
    phs = pot.phase_scale
    i_over = 1j / eps
    d = shift * lam

    def rhs(x, y):
        c = 1.0 / math.cosh(2.0 * x)
        w = -1j * (amp * c) * cmath.exp(1j * (phs * c) / eps)
        return [
            i_over * ((d - lam) * y[0] + w * y[1]),
            i_over * (w.conjugate() * y[0] + (d + lam) * y[1]),
        ]

    return rhs


def _rhs_v(lam: complex, eps: float, pot: Potential, shift: float):
    """Off-diagonal gauge of the same system (entries g+/g-)."""
    i_over = 1j / eps
    d = shift * lam

    def rhs(x, y):
        gp = pot.g_plus(x, lam)
        gm = pot.g_minus(x, lam)
        return [
            i_over * (d * y[0] + gp * y[1]),
            i_over * (-gm * y[0] + d * y[1]),
        ]

    return rhs


_FRAME_RHS = {"u": _rhs_u, "v": _rhs_v}


def _max_step(lam: complex, eps: float) -> float:
    # resolve the fastest local oscillation, rate ~ max(1, |lam|)/eps
    return eps / (4.0 * max(1.0, abs(lam)))


def _solve_column(
    lam: complex,
    eps: float,
    pot: Potential,
    *,
    frame: str,
    shift: float,
    x0: float,
    x1: float,
    y0,
    rtol: float,
) -> np.ndarray:
    rhs = _FRAME_RHS[frame](lam, eps, pot, shift)
    sol = solve_ivp(
        rhs,
        (x0, x1),
        np.asarray(y0, dtype=complex),
        method="DOP853",
        rtol=rtol,
        atol=_ATOL,
        max_step=_max_step(lam, eps),
    )
    if not sol.success:
        raise StepUnderflow(f"integration stalled at x={sol.t[-1]:.6g}: {sol.message}")
    return sol.y[:, -1]


# -- gauge maps --------------------------------------------------------------


def _gauge_matrix(x: float, eps: float, pot: Potential) -> np.ndarray:
    half = pot.S(x) / (2.0 * eps)
    return np.array(
        [
            [cmath.exp(1j * half), cmath.exp(1j * half)],
            [-cmath.exp(-1j * half), cmath.exp(-1j * half)],
        ],
        dtype=complex,
    )


def gauge_u_from_v(x: float, v, eps: float, pot: Potential = DEFAULT) -> np.ndarray:
    """Map a column (or frame) of the off-diagonal gauge back to the original one."""
    return _gauge_matrix(x, eps, pot) @ np.asarray(v, dtype=complex)


def gauge_v_from_u(x: float, u, eps: float, pot: Potential = DEFAULT) -> np.ndarray:
    """Inverse of :func:`gauge_u_from_v` at the same point."""
    return np.linalg.solve(_gauge_matrix(x, eps, pot), np.asarray(u, dtype=complex))


# -- reference frame transit -------------------------------------------------


@dataclass
class FrameSolution:
    """Dense fundamental-frame transit over [-L, L].

    ``at(x)`` returns the raw 2x2 frame; ``end`` is the frame at +L.
    """

    lam: complex
    eps: float
    frame: str
    L: float
    pot: Potential
    init: np.ndarray
    _sol: object

    def at(self, x: float) -> np.ndarray:
        return np.asarray(self._sol(x)).reshape(2, 2, order="F")

    @property
    def end(self) -> np.ndarray:
        return self.at(self.L)


def integrate_zs(
    lam,
    eps: float,
    *,
    L: float = L_DEFAULT,
    init=None,
    frame: str = "u",
    pot: Potential = DEFAULT,
    rtol: float = _RTOL,
) -> FrameSolution:
    """Propagate a raw 2x2 frame from x=-L to x=+L.

    The default ``init`` is the asymptotic Jost frame at -L,
    ``diag(exp(-i*lam*x/eps), exp(+i*lam*x/eps))`` evaluated there.  The
    generator is trace-free in both gauges, so the determinant of the
    returned frame equals ``det(init)`` up to integration error.

    Raw transits of strongly decaying/growing columns overflow doubles;
    this entry point guards the exponent and refuses, pointing at the
    phase-referenced eigenvalue machinery instead.
    """
    lam = complex(lam)
    _check_core(eps, L)
    if frame not in _FRAME_RHS:
        raise ValueError(f"frame must be 'u' or 'v', got {frame!r}")
    if abs(lam.imag) * 2.0 * L / eps > _EXP_GUARD:
        raise ValueError(
            "raw frame transit would overflow: |Im lam|*2L/eps too large;"
            " use the phase-referenced solves (transmission_a) instead"
        )
    if init is None:
        z = cmath.exp(1j * lam * L / eps)
        init = np.array([[z, 0.0], [0.0, 1.0 / z]], dtype=complex)
    else:
        init = np.asarray(init, dtype=complex)
        if init.shape != (2, 2):
            raise ValueError("init must be a 2x2 frame")

    col = _FRAME_RHS[frame](lam, eps, pot, 0.0)

    def rhs(x, y):
        d1 = col(x, y[0:2])
        d2 = col(x, y[2:4])
        return [d1[0], d1[1], d2[0], d2[1]]

    sol = solve_ivp(
        rhs,
        (-L, L),
        init.reshape(4, order="F"),
        method="DOP853",
        rtol=rtol,
        atol=_ATOL,
        max_step=_max_step(lam, eps),
        dense_output=True,
    )
    if not sol.success:
        raise StepUnderflow(f"integration stalled at x={sol.t[-1]:.6g}: {sol.message}")
    return FrameSolution(lam=lam, eps=eps, frame=frame, L=L, pot=pot, init=init, _sol=sol.sol)


# -- the analytic coefficient a(lam) ----------------------------------------


@lru_cache(maxsize=8192)
def _a_frame(lam: complex, eps: float, frame: str, pot: Potential, L: float, rtol: float) -> complex:
    up = lam.imag >= 0.0
    y_left = (1.0, 0.0) if up else (0.0, 1.0)
    y_right = (0.0, 1.0) if up else (1.0, 0.0)
    s_left = 1.0 if up else -1.0

    if frame == "v":
        y_left = np.linalg.solve(_gauge_matrix(-L, eps, pot), np.asarray(y_left, complex))
        y_right = np.linalg.solve(_gauge_matrix(L, eps, pot), np.asarray(y_right, complex))

    phi = _solve_column(
        lam, eps, pot, frame=frame, shift=s_left, x0=-L, x1=0.0, y0=y_left, rtol=rtol
    )
    psi = _solve_column(
        lam, eps, pot, frame=frame, shift=-s_left, x0=L, x1=0.0, y0=y_right, rtol=rtol
    )
    if frame == "v":
        g0 = _gauge_matrix(0.0, eps, pot)
        phi = g0 @ phi
        psi = g0 @ psi
    return complex(phi[0] * psi[1] - phi[1] * psi[0])


def _rhs_scalar(lam: complex, eps: float, pot: Potential, shift: float):
    """Second-order scalar reduction, phase-referenced like the columns.

    With W = What * exp(shift*i*lam*x/eps) the equation
    W'' = (-f/eps^2 + g) W becomes a first-derivative-coupled system for
    (What, What') whose solutions stay O(1) along the stable direction.
    """
    lam2 = lam * lam
    eps2 = eps * eps
    two_shift = 2j * lam * shift / eps

    def rhs(x, y):
        q = (lam2 - pot.f(x, lam)) / eps2 + pot.correction_g(x, lam)
        return [y[1], q * y[0] - two_shift * y[1]]

    return rhs


def _scalar_jost_at_zero(
    lam: complex, eps: float, pot: Potential, shift: float, side: float, rtol: float, L: float
) -> Tuple[complex, complex]:
    """Value and derivative at x=0 of the scalar Jost solution ~ exp(shift*i*lam*x/eps) at side*inf."""
    rhs = _rhs_scalar(lam, eps, pot, shift)
    sol = solve_ivp(
        rhs,
        (side * L, 0.0),
        np.array([1.0, 0.0], dtype=complex),
        method="DOP853",
        rtol=rtol,
        atol=_ATOL,
        max_step=_max_step(lam, eps),
    )
    if not sol.success:
        raise StepUnderflow(f"integration stalled at x={sol.t[-1]:.6g}: {sol.message}")
    what, dwhat = sol.y[:, -1]
    # back to the raw value/derivative; the reference phase is 1 at x=0
    return complex(what), complex(dwhat + shift * (1j * lam / eps) * what)


@lru_cache(maxsize=4096)
def _a_scalar(lam: complex, eps: float, pot: Potential, L: float, rtol: float) -> complex:
    if pot.amp_scale != pot.phase_scale:
        raise ValueError(
            "the scalar reduction is derived for the symmetric pair"
            " (amp_scale == phase_scale)"
        )
    up = lam.imag >= 0.0
    jl = _scalar_jost_at_zero(lam, eps, pot, -1.0 if up else 1.0, -1.0, rtol, L)
    jr = _scalar_jost_at_zero(lam, eps, pot, 1.0 if up else -1.0, 1.0, rtol, L)
    wronsk = jl[0] * jr[1] - jl[1] * jr[0]
    return complex(wronsk * eps / (2j * lam))


def transmission_a(
    lam,
    eps: float,
    *,
    method: str = "u",
    pot: Potential = DEFAULT,
    L: float = L_DEFAULT,
    rtol: float = _RTOL,
) -> complex:
    """The analytic coefficient whose upper-half-plane zeros are eigenvalues.

    ``a(lam)`` is the Wronskian-type determinant of the left-decaying and
    right-decaying Jost columns, met at x=0.  ``method`` selects the
    computation route: the original frame (``"u"``), the off-diagonal
    gauge (``"v"``), or the second-order scalar reduction (``"scalar"``).
    All three agree to integration tolerance; the scalar route is
    normalized so its large-|lam| limit matches the frame routes.
    """
    lam = complex(lam)
    _check_core(eps, L)
    if abs(lam.imag) < 1e-12 and lam.real == 0.0:
        raise ValueError("lam=0 is outside the domain of a(lam)")
    if method == "scalar":
        return _a_scalar(lam, eps, pot, L, rtol)
    if method not in _FRAME_RHS:
        raise ValueError(f"method must be 'u', 'v' or 'scalar', got {method!r}")
    return _a_frame(lam, eps, method, pot, L, rtol)


# -- scattering data and reflection ------------------------------------------


@dataclass(frozen=True)
class ScatteringData:
    """Transfer data across the line at one real lam."""

    lam: float
    eps: float
    a: complex
    b: complex
    reflection: complex
    frame_left: np.ndarray
    frame_right: np.ndarray


def scattering_data(
    lam,
    eps: float,
    *,
    pot: Potential = DEFAULT,
    L: float = L_DEFAULT,
    rtol: float = _RTOL,
) -> ScatteringData:
    """Full transit at real lam: a, b, reflection, and the frames at +-L."""
    lam = _real_nonzero(lam)
    transit = integrate_zs(lam, eps, L=L, pot=pot, rtol=rtol)
    right = transit.end
    z = cmath.exp(1j * lam * L / eps)
    a = complex(right[0, 0] * z)
    b = complex(right[1, 0] / z)
    return ScatteringData(
        lam=lam,
        eps=eps,
        a=a,
        b=b,
        reflection=-b / a,
        frame_left=transit.init,
        frame_right=right,
    )


def _reflection_scalar(lam: float, eps: float, pot: Potential, L: float, rtol: float) -> complex:
    j_minus_l = _scalar_jost_at_zero(lam, eps, pot, -1.0, -1.0, rtol, L)
    j_minus_r = _scalar_jost_at_zero(lam, eps, pot, -1.0, 1.0, rtol, L)
    j_plus_r = _scalar_jost_at_zero(lam, eps, pot, 1.0, 1.0, rtol, L)

    def wronsk(u, v):
        return u[0] * v[1] - u[1] * v[0]

    return complex(wronsk(j_minus_l, j_minus_r) / wronsk(j_plus_r, j_minus_l))


def reflection_coefficient(
    lam,
    eps: float,
    *,
    route: str = "frame",
    pot: Potential = DEFAULT,
    L: float = L_DEFAULT,
    rtol: float = _RTOL,
) -> Union[complex, Tuple[complex, complex]]:
    """Reflection coefficient at real lam != 0.

    ``route="frame"`` extracts it from the full frame transit;
    ``route="scalar"`` forms the Wronskian ratio of the three scalar Jost
    solutions.  ``route="both"`` returns the pair ``(frame, scalar)`` so
    callers can compare the independent computations.
    """
    lam = _real_nonzero(lam)
    if route == "frame":
        return scattering_data(lam, eps, pot=pot, L=L, rtol=rtol).reflection
    if route == "scalar":
        _check_core(eps, L)
        if pot.amp_scale != pot.phase_scale:
            raise ValueError(
                "the scalar reduction is derived for the symmetric pair"
                " (amp_scale == phase_scale)"
            )
        return _reflection_scalar(lam, eps, pot, L, rtol)
    if route == "both":
        return (
            reflection_coefficient(lam, eps, route="frame", pot=pot, L=L, rtol=rtol),
            reflection_coefficient(lam, eps, route="scalar", pot=pot, L=L, rtol=rtol),
        )
    raise ValueError(f"route must be 'frame', 'scalar' or 'both', got {route!r}")


def sigma_phase(
    lam, *, pot: Potential = DEFAULT, split: bool = False, absolute: bool = False
) -> Union[float, Tuple[float, float]]:
    """Phase normalizer: integral of sqrt(f) - lam over the line (lam > 0).

    With ``split=True`` the two half-line integrals are returned
    separately instead of summed; with ``absolute=True`` the integrand
    is |sqrt(f) - lam| (the L1 norm of the deviation).  The two options
    genuinely differ here: sqrt(f) dips below lam on the right tail, so
    the signed halves are unequal and the signed total is smaller than
    the L1 norm.  The signed right half doubled, exp(2i/eps * right), is
    the phase factor relating the reflection coefficient to the ratio of
    center-normalized WKB Wronskians.
    """
    lam = _real_nonzero(lam)
    if lam < 0:
        raise ValueError("sigma is defined for lam > 0 (the integrand must decay)")

    def integrand(x):
        v = math.sqrt(pot.f(x, lam).real) - lam
        return abs(v) if absolute else v

    left = quad(integrand, -np.inf, 0.0, epsabs=1e-13, epsrel=1e-13, limit=400)[0]
    right = quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-13, limit=400)[0]
    if split:
        return (left, right)
    return left + right


# -- norming constants --------------------------------------------------------


def _wkb_tail_phase(lam: complex, pair, pot: Potential) -> complex:
    """Exponent E of the normalization relating Jost ratios to the
    turning-point-normalized eigenfunction ratio.

    Writing alpha/beta for the quantizing turning points (alpha the one
    with smaller real part), E collects the two regularized tails
    int (w + lam) dt from each turning point out to its infinity plus
    the endpoint terms lam*(alpha+beta); the eigenfunction ratio is then
    (right/left Jost ratio) * exp(-i E / eps).
    """
    from .action import contour_integral  # local: keeps the base module independent
    from .geometry import find_turning_points

    tps = find_turning_points(lam, pot)
    j, k = pair
    a, b = tps[f"x{j}"].x, tps[f"x{k}"].x
    if a.real > b.real:
        a, b = b, a

    def shifted(v):
        return v + lam

    left = contour_integral(a, -18.0 + 0j, lam, shifted, pot=pot)
    right = contour_integral(b, 18.0 + 0j, lam, shifted, pot=pot)
    return left + right + lam * (a + b)


def _infer_pair(lam: complex) -> Tuple[int, int]:
    if abs(lam.real) < 1e-8:
        return (1, 2)
    return (2, 6) if lam.real > 0 else (1, 6)


def norming_constant_direct(
    lam_eig,
    eps: float,
    *,
    midpoint: float = 0.0,
    convention: str = "wkb",
    pair: Optional[Tuple[int, int]] = None,
    pot: Potential = DEFAULT,
    L: float = L_DEFAULT,
    rtol: float = _RTOL,
) -> complex:
    """Proportionality constant of the two decaying Jost solutions.

    At an eigenvalue the right-decaying and left-decaying Jost columns
    span the same line; the raw ratio (``convention="jost"``) is
    right/left evaluated at ``midpoint`` with the unit-amplitude
    normalizations at -+inf, a quantity independent of the midpoint.
    The default ``convention="wkb"`` renormalizes to the ratio of the
    eigenfunctions anchored at the quantizing turning-point pair (the
    convention in which the constants tend to +-1 with alternating
    signs along an arc); ``pair`` defaults to the arc the eigenvalue
    sits on, inferred from its real part.

    Raises ValueError when the columns are measurably non-proportional,
    i.e. when ``lam_eig`` is not an eigenvalue to working accuracy.
    """
    lam = complex(lam_eig)
    _check_core(eps, L)
    if lam.imag <= 0:
        raise ValueError("norming constants are defined for upper-half-plane eigenvalues")
    if not -L < midpoint < L:
        raise ValueError(f"midpoint must lie inside (-{L}, {L})")
    if convention not in ("wkb", "jost"):
        raise ValueError(f"convention must be 'wkb' or 'jost', got {convention!r}")
    phi = _solve_column(
        lam, eps, pot, frame="u", shift=1.0, x0=-L, x1=midpoint, y0=(1.0, 0.0), rtol=rtol
    )
    psi = _solve_column(
        lam, eps, pot, frame="u", shift=-1.0, x0=L, x1=midpoint, y0=(0.0, 1.0), rtol=rtol
    )
    defect = abs(phi[0] * psi[1] - phi[1] * psi[0])
    scale = float(np.linalg.norm(phi) * np.linalg.norm(psi))
    if defect > 1e-6 * scale:
        raise ValueError(
            f"lam={lam} is not an eigenvalue to working accuracy:"
            f" Jost columns are not proportional (defect {defect:.3e})"
        )
    k = int(np.argmax(np.abs(phi * psi)))
    ratio = complex(psi[k] / phi[k] * cmath.exp(2j * lam * midpoint / eps))
    if convention == "jost":
        return ratio
    ex = _wkb_tail_phase(lam, pair if pair is not None else _infer_pair(lam), pot)
    return ratio * cmath.exp(-1j * ex / eps)


# -- eigenvalues by argument principle ----------------------------------------


@dataclass(frozen=True)
class OracleEigenvalue:
    """One certified zero of a(lam).

    ``winding_box`` is the certificate rectangle on whose boundary the
    argument of a(lam) winds exactly once around zero.  ``condition``
    estimates the eigenvalue's sensitivity: the shift per unit
    perturbation of the potential amplitude, |da/d amp| / |a'(lam)|.
    """

    lam: complex
    eps: float
    residual: float
    norming: complex
    winding_box: Rectangle
    condition: float


def _box_boundary(box: Rectangle, spacing: float) -> List[complex]:
    """Counterclockwise closed sample loop (last point != first)."""
    pts: List[complex] = []
    corners = list(box.corners())
    for k in range(4):
        z0, z1 = corners[k], corners[(k + 1) % 4]
        n = max(4, int(math.ceil(abs(z1 - z0) / spacing)))
        for j in range(n):
            pts.append(z0 + (z1 - z0) * (j / n))
    return pts


def _winding(
    box: Rectangle,
    eps: float,
    pot: Potential,
    L: float,
    rtol: float,
    budget: List[int],
) -> int:
    """Winding number of a(lam) around the box boundary.

    Adaptively bisects boundary segments until every phase increment is
    unambiguous.  Raises WindingAmbiguous when a segment cannot be
    resolved (a root on or hugging the boundary) or the evaluation
    budget is exhausted.
    """

    def a_of(z: complex) -> complex:
        budget[0] -= 1
        if budget[0] < 0:
            raise WindingAmbiguous("evaluation budget exhausted while resolving a boundary")
        return _a_frame(z, eps, "u", pot, L, rtol)

    pts = _box_boundary(box, spacing=max(0.35 * eps, 0.01))
    vals = _pmap(a_of, pts)
    floor = 1e-10 * max(abs(v) for v in vals)

    total = 0.0
    for k in range(len(pts)):
        z0, a0 = pts[k], vals[k]
        z1, a1 = pts[(k + 1) % len(pts)], vals[(k + 1) % len(pts)]
        stack = [(z0, a0, z1, a1)]
        while stack:
            w0, b0, w1, b1 = stack.pop()
            if min(abs(b0), abs(b1)) < floor:
                raise WindingAmbiguous(
                    f"|a| ~ 0 on the boundary near lam={w0:.6g}: root too close to the box edge"
                )
            dphi = cmath.phase(b1 / b0)
            if abs(dphi) <= 2.0:
                total += dphi
                continue
            if abs(w1 - w0) < 1e-10:
                raise WindingAmbiguous(
                    f"irreducible phase jump at lam={w0:.6g}: root on the boundary"
                )
            mid = 0.5 * (w0 + w1)
            bm = a_of(mid)
            stack.append((mid, bm, w1, b1))
            stack.append((w0, b0, mid, bm))
    w = total / (2.0 * math.pi)
    if abs(w - round(w)) > 1e-3:
        raise WindingAmbiguous(f"non-integer winding {w:.6f} around {box}")
    return int(round(w))


def _newton_a(
    lam0: complex, eps: float, pot: Potential, L: float, rtol: float
) -> Tuple[complex, float, complex]:
    """Polish a root of a(lam); returns (root, |a(root)|, a'(root))."""
    lam = lam0
    h = 1e-7
    deriv = 0.0j
    for _ in range(24):
        val = _a_frame(lam, eps, "u", pot, L, rtol)
        deriv = (
            _a_frame(lam + h, eps, "u", pot, L, rtol)
            - _a_frame(lam - h, eps, "u", pot, L, rtol)
        ) / (2.0 * h)
        if deriv == 0:
            raise NewtonDivergence(f"a'(lam) vanished at {lam}")
        step = val / deriv
        lam = lam - step
        if abs(step) < 1e-12 and abs(val) < 1e-9:
            return lam, abs(_a_frame(lam, eps, "u", pot, L, rtol)), deriv
    raise NewtonDivergence(f"no convergence polishing near {lam0}")


def _as_rectangle(region) -> Rectangle:
    if isinstance(region, Rectangle):
        return region
    re_min, re_max, im_min, im_max = region
    return Rectangle(float(re_min), float(re_max), float(im_min), float(im_max))


def _split(box: Rectangle, frac: float) -> Tuple[Rectangle, Rectangle]:
    if (box.re_max - box.re_min) >= (box.im_max - box.im_min):
        cut = box.re_min + frac * (box.re_max - box.re_min)
        return (
            Rectangle(box.re_min, cut, box.im_min, box.im_max),
            Rectangle(cut, box.re_max, box.im_min, box.im_max),
        )
    cut = box.im_min + frac * (box.im_max - box.im_min)
    return (
        Rectangle(box.re_min, box.re_max, box.im_min, cut),
        Rectangle(box.re_min, box.re_max, cut, box.im_max),
    )


def _diam(box: Rectangle) -> float:
    return math.hypot(box.re_max - box.re_min, box.im_max - box.im_min)


def _contains(box: Rectangle, lam: complex) -> bool:
    return box.re_min <= lam.real <= box.re_max and box.im_min <= lam.imag <= box.im_max


def _certificate(
    root: complex, eps: float, pot: Potential, L: float, rtol: float, budget: List[int]
) -> Rectangle:
    """A small box around the root with winding exactly 1."""
    side = 4e-4
    for _ in range(4):
        im_lo = root.imag - side / 2
        im_hi = root.imag + side / 2
        if im_lo < 1e-3 <= root.imag:
            im_lo, im_hi = 1e-3, 1e-3 + side  # keep the certificate off the axis
        box = Rectangle(root.real - side / 2, root.real + side / 2, im_lo, im_hi)
        try:
            if _winding(box, eps, pot, L, rtol, budget) == 1:
                return box
        except WindingAmbiguous:
            pass
        side *= 2.7
    raise WindingAmbiguous(f"could not certify a winding-1 box around {root}")


def direct_eigenvalues(
    eps: float,
    region=None,
    *,
    pot: Potential = DEFAULT,
    L: float = L_DEFAULT,
    rtol: float = _RTOL,
    budget: int = 60000,
) -> Tuple[OracleEigenvalue, ...]:
    """All zeros of a(lam) inside ``region``, each with a winding certificate.

    ``region`` is a Rectangle (or 4-tuple) staying at least 1e-3 away
    from the real axis; the default covers the closed upper half of the
    numerical range with a small margin.  Boxes are subdivided until
    each holds a single winding-1 root, which Newton then polishes; a
    split line that lands on a root is nudged and retried.
    """
    _check_core(eps, L)
    if region is None:
        nr = pot.numerical_range()
        region = Rectangle(nr.re_min - 0.02, nr.re_max + 0.02, 1e-3, nr.im_max + 0.02)
    region = _as_rectangle(region)
    if not (region.re_min < region.re_max and region.im_min < region.im_max):
        raise ValueError(f"degenerate region {region}")
    if region.im_min < 1e-3 and region.im_max > -1e-3:
        raise ValueError("region must stay at least 1e-3 away from the real axis")

    budget_box = [budget]
    roots: List[Tuple[complex, float, complex]] = []
    work = [region]
    while work:
        box = work.pop()
        try:
            w = _winding(box, eps, pot, L, rtol, budget_box)
        except WindingAmbiguous:
            if box is region:
                # a root sits on the outer boundary: inflate once and restart
                grown = Rectangle(
                    region.re_min - 0.017,
                    region.re_max + 0.017,
                    max(1e-3, region.im_min - 0.017) if region.im_min > 0 else region.im_min - 0.017,
                    region.im_max + 0.017,
                )
                return direct_eigenvalues(
                    eps, grown, pot=pot, L=L, rtol=rtol, budget=budget_box[0]
                )
            raise
        if w == 0:
            continue
        if w == 1 and _diam(box) < 0.08:
            center = complex(0.5 * (box.re_min + box.re_max), 0.5 * (box.im_min + box.im_max))
            root, residual, deriv = _newton_a(center, eps, pot, L, rtol)
            if _contains(box, root):
                roots.append((root, residual, deriv))
                continue
            # Newton escaped the box: fall through to subdivision
        if _diam(box) < 1e-5:
            raise RootCountMismatch(
                f"unresolvable root cluster (winding {w}) in a box of diameter {_diam(box):.2e}"
            )
        for frac in (0.5, 0.57, 0.43, 0.63):
            try:
                lo, hi = _split(box, frac)
                _winding(lo, eps, pot, L, rtol, budget_box)
                _winding(hi, eps, pot, L, rtol, budget_box)
                work.extend([lo, hi])
                break
            except WindingAmbiguous:
                continue
        else:
            raise WindingAmbiguous(f"every candidate split of {box} lands on a root")

    # dedupe (sibling boxes can hand Newton the same root)
    uniq: List[Tuple[complex, float, complex]] = []
    for root, residual, deriv in sorted(roots, key=lambda r: (r[0].real, r[0].imag)):
        if all(abs(root - u[0]) > 1e-7 for u in uniq):
            uniq.append((root, residual, deriv))

    out = []
    pert = replace(pot, amp_scale=pot.amp_scale + 1e-8)
    for root, residual, deriv in uniq:
        box = _certificate(root, eps, pot, L, rtol, budget_box)
        da = abs(_a_frame(root, eps, "u", pert, L, rtol)) / 1e-8
        out.append(
            OracleEigenvalue(
                lam=root,
                eps=eps,
                residual=residual,
                norming=norming_constant_direct(root, eps, pot=pot, L=L, rtol=rtol),
                winding_box=box,
                condition=da / abs(deriv),
            )
        )
    return tuple(out)
