"""Turning-point frame, error-control variation, and remainder bounds.

At a simple zero c of V0 the Liouville-transformed variable

    zeta(x) = ( integral_c^x V0^(1/2) dt )^(2/3)

straightens the scalar equation w'' = [eps^-2 V0 + g] w into a perturbed
comparison equation; this module builds that conformal frame, evaluates
the variation of the error-control function along progressive paths, and
assembles the explicit remainder bound from the comparison-equation
weight/modulus functions (module `mbf`).

The branch of zeta is pinned near c by the Taylor model
(2/3)^(2/3) f0^(1/3) (x - c) [1 + ...] with f0 = V0'(c) and the principal
cube root, then continued outward; zeta is single-valued (a loop around c
advances arg of the action integral by 3*pi, i.e. a full turn of zeta).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from . import mbf
from .errors import (BranchContinuationFailure, NonMonotoneAction,
                     PathObstructed)
from .exactwkb import _GL_NODES, _GL_WEIGHTS, _continue_sqrt, _panelize
from .potential import DEFAULT, Potential

__all__ = [
    "OlverFrame",
    "VariationValue",
    "olver_frame",
    "zeta_map",
    "variation_H",
    "olver_error_bound",
    "kappa0_bound",
    "rho_jk",
]

_MIN_TP_CLEARANCE = 1e-3
_FD_STEP = 5e-4
_PANEL_LEN = 0.04
_RADIAL_PANELS = 24


def _resolve_omega(omega) -> Tuple[Callable[[np.ndarray], np.ndarray], str]:
    """Normalize a balancing-function choice to (callable, identifier)."""
    if omega is None or omega == "balanced":
        return (lambda t: (1.0 + np.abs(t) ** 2) ** 0.25), "balanced"
    if omega == "unit":
        return (lambda t: np.ones_like(np.abs(t))), "unit"
    if callable(omega):
        return omega, getattr(omega, "__name__", "custom")
    raise ValueError(f"unknown balancing function {omega!r}")


class OlverFrame:
    """Conformal turning-point frame at a simple zero c of V0.

    Carries the turning point, the spectral parameter, the chosen cube
    root of f0 = V0'(c), and samplers zeta(x), fhat(x) and sector(x).
    fhat = (4/9) V0 / zeta = (d zeta/dx)^2 is holomorphic and nonzero on
    the working subdomain, which makes the map conformal there.
    """

    def __init__(self, c: complex, lam: complex, pot: Potential = DEFAULT):
        self.c = complex(c)
        self.lam = complex(lam)
        self.pot = pot
        self.f0 = complex(pot.dV0_dx(self.c, self.lam))
        if abs(self.f0) < 1e-8:
            raise BranchContinuationFailure(
                f"V0' vanishes at c={self.c:.6f}: not a simple zero")
        # principal cube root fixes the frame; everything else follows
        # by continuity
        self.root_f0 = self.f0 ** (1.0 / 3.0)
        self._sqrt_f0 = self.root_f0 ** 1.5
        self._f1 = self._second_taylor()
        self._cache: Dict[complex, Tuple[complex, complex, float]] = {}

    def _second_taylor(self) -> complex:
        """f1 in V0 = f0 (x-c) + f1 (x-c)^2 + ...; f1 = V0''(c)/2."""
        pot, c, lam = self.pot, self.c, self.lam
        m = lam + pot.Sprime(c) / 2.0
        v2 = -(pot.Spp(c) ** 2 / 2.0 + m * pot.Sppp(c)
               + 2.0 * pot.Aprime(c) ** 2 + 2.0 * pot.A(c) * pot.App(c))
        return complex(v2) / 2.0

    # -- core samplers --------------------------------------------------

    def action(self, x) -> Tuple[complex, float]:
        """(I, theta): I = integral_c^x V0^(1/2) dt in the pinned branch
        and theta its continuously tracked argument (a real number, not
        reduced mod 2*pi)."""
        xc = complex(x)
        hit = self._cache.get(xc)
        if hit is not None:
            return hit[1], hit[2]
        zeta, act, theta = self._evaluate(xc)
        self._cache[xc] = (zeta, act, theta)
        return act, theta

    def zeta(self, x) -> complex:
        xc = complex(x)
        hit = self._cache.get(xc)
        if hit is not None:
            return hit[0]
        zeta, act, theta = self._evaluate(xc)
        self._cache[xc] = (zeta, act, theta)
        return zeta

    def fhat(self, x) -> complex:
        """(4/9) V0 / zeta, extended by its limit at the turning point."""
        xc = complex(x)
        if abs(xc - self.c) < 1e-7:
            return (4.0 / 9.0) * (1.5 ** (2.0 / 3.0)) * self.root_f0 ** 2
        return (4.0 / 9.0) * complex(self.pot.V0(xc, self.lam)) / self.zeta(xc)

    def sector(self, x) -> int:
        """Index j of the sector (2j-1)pi/3 <= ph zeta <= (2j+1)pi/3."""
        return mbf.sector_of(self.zeta(x))

    def zeta_taylor(self, x) -> complex:
        """Two-term model (2/3)^(2/3) f0^(1/3) (x-c)[1 + (f1/5f0)(x-c)]."""
        dx = complex(x) - self.c
        return ((2.0 / 3.0) ** (2.0 / 3.0) * self.root_f0 * dx
                * (1.0 + self._f1 / (5.0 * self.f0) * dx))

    # -- construction ----------------------------------------------------

    def _evaluate(self, x: complex) -> Tuple[complex, complex, float]:
        """Radial action integral with branch pinned by the Taylor model.

        The segment is parametrized t = c + s^2 (x - c), which absorbs the
        square-root vanishing of V0^(1/2) at c; cumulative panel sums give
        a continuous track for arg I so the 2/3 power is taken in the
        right determination.
        """
        dx = x - self.c
        rho = abs(dx)
        if rho == 0.0:
            return 0.0 + 0.0j, 0.0 + 0.0j, 0.0
        phi = cmath.phase(dx)
        w_half = cmath.sqrt(dx)                     # principal: e^{i phi/2}
        n_panels = max(_RADIAL_PANELS, int(math.ceil(rho / 0.04)))
        nodes, halfx, _ = _panelize([0.0, 1.0], n_panels)
        sigma = nodes.real
        ts = self.c + sigma ** 2 * dx
        vals = np.asarray(self.pot.V0(ts, self.lam), dtype=complex)

        # another zero of V0 on the segment would break the branch track
        model = np.abs(self.f0) * np.abs(ts - self.c)
        risky = (sigma > 0.2) & (np.abs(vals) < 0.05 * model)
        if risky.any():
            raise BranchContinuationFailure(
                f"segment from c={self.c:.4f} to x={x:.4f} passes near "
                "another zero of the coefficient")

        seed_t = ts.ravel()[0]
        seed = (self._sqrt_f0 * sigma.ravel()[0] * w_half
                * cmath.sqrt(1.0 + self._f1 / self.f0 * (seed_t - self.c)))
        q = _continue_sqrt(vals, seed)

        integ = 2.0 * dx * ((q * sigma) @ _GL_WEIGHTS) * halfx.real
        partial = np.cumsum(integ)
        theta_model = cmath.phase(self._sqrt_f0) + 1.5 * phi
        args = np.unwrap(np.angle(partial))
        args += 2.0 * math.pi * round((theta_model - args[0]) / (2.0 * math.pi))
        act = partial[-1]
        theta = float(args[-1])
        zeta = abs(act) ** (2.0 / 3.0) * cmath.exp(2j * theta / 3.0)
        return zeta, act, theta


_FRAME_CACHE: Dict[Tuple[complex, complex, int], OlverFrame] = {}


def olver_frame(c, lam, pot: Potential = DEFAULT) -> OlverFrame:
    """Frame at turning point c, cached per (c, lam, potential)."""
    key = (complex(c), complex(lam), id(pot))
    frame = _FRAME_CACHE.get(key)
    if frame is None:
        frame = OlverFrame(c, lam, pot)
        _FRAME_CACHE[key] = frame
    return frame


def zeta_map(x, lam, c, pot: Potential = DEFAULT) -> complex:
    """zeta(x) = (integral_c^x V0^(1/2))^(2/3), pinned as in OlverFrame."""
    return olver_frame(c, lam, pot).zeta(x)


# -- variation of the error-control function -------------------------------

def _segment_clearance(path: Sequence[complex], c: complex) -> float:
    """Minimum distance from c to the polyline (true segment distance)."""
    best = math.inf
    pts = [complex(p) for p in path]
    for a, b in zip(pts[:-1], pts[1:]):
        d = b - a
        if d == 0:
            best = min(best, abs(a - c))
            continue
        s = ((c - a) / d).real
        s = min(1.0, max(0.0, s))
        best = min(best, abs(a + s * d - c))
    return best


def _segment_panels(path: Sequence[complex]):
    """GL panels allocated independently per waypoint segment.

    Returns (nodes, halfx) like _panelize, but with panel boundaries that
    depend only on each segment's own endpoints and length.
    """
    pts = [complex(p) for p in path]
    nodes_parts = []
    halfx_parts = []
    for a, b in zip(pts[:-1], pts[1:]):
        seg = abs(b - a)
        if seg == 0.0:
            continue
        m = max(3, int(math.ceil(seg / _PANEL_LEN)))
        bounds = a + (b - a) * np.linspace(0.0, 1.0, m + 1)
        lo, hi = bounds[:-1], bounds[1:]
        half = (hi - lo) / 2.0
        nodes_parts.append((lo + hi)[:, None] / 2.0
                           + half[:, None] * _GL_NODES[None, :])
        halfx_parts.append(half)
    if not nodes_parts:
        raise ValueError("path has zero length")
    return np.vstack(nodes_parts), np.concatenate(halfx_parts)


@dataclass(frozen=True)
class VariationValue:
    """Variation of the error-control function along a progressive path."""

    path: Tuple[complex, ...]
    lam: complex
    eps: float
    omega_id: str
    value: float

    def __float__(self) -> float:
        return self.value


class _PathProfile:
    """Epsilon-independent data of a variation path: quadrature nodes,
    arclength weights, zeta values, and the unweighted integrand

        psi = v v'' - g v^2,     v = fhat^(-1/4)

    (branch-consistent along the path; |psi| is branch-free since both
    terms carry the same square of v)."""

    def __init__(self, path: Tuple[complex, ...], lam: complex, c: complex,
                 pot: Potential):
        frame = olver_frame(c, lam, pot)
        # panels are allocated per waypoint segment, so concatenated paths
        # reproduce exactly the node set of their pieces (additivity is
        # then exact, not merely converged)
        nodes, halfx = _segment_panels(path)
        flat = nodes.ravel()
        if _segment_clearance(path, frame.c) <= _MIN_TP_CLEARANCE:
            raise PathObstructed(
                f"path passes within {_MIN_TP_CLEARANCE} of the turning "
                f"point {frame.c:.6f}")

        weights = (np.abs(halfx)[:, None] * _GL_WEIGHTS[None, :]).ravel()
        zetas = np.empty(flat.size, dtype=complex)
        actions = np.empty(flat.size, dtype=complex)
        psis = np.empty(flat.size, dtype=complex)
        prev_root: Optional[complex] = None
        g_vals = np.asarray(pot.correction_g(flat, lam), dtype=complex)
        for m, xm in enumerate(flat):
            zetas[m] = frame.zeta(xm)
            actions[m] = frame.action(xm)[0]
            psis[m], prev_root = _psi_at(frame, complex(xm),
                                         complex(g_vals[m]), prev_root)
        self.frame = frame
        self.nodes = flat
        self.weights = weights
        self.zetas = zetas
        self.actions = actions
        self.abs_psi = np.abs(psis)
        self._check_progressive()

    def _check_progressive(self) -> None:
        # The per-point radial branch of the action flips sign across the
        # ray where arg(x - c) wraps; heal to the continuous determination
        # before testing monotonicity.
        acts = self.actions.copy()
        for m in range(1, acts.size):
            if abs(acts[m] - acts[m - 1]) > abs(acts[m] + acts[m - 1]):
                acts[m:] = -acts[m:]
        re = acts.real
        tol = 1e-8 * (1.0 + np.abs(acts).max())
        d = np.diff(re)
        if not ((d >= -tol).all() or (d <= tol).all()):
            raise NonMonotoneAction(
                "path is not progressive: Re of the action integral is "
                "not monotone along it")

    def variation(self, eps: float, omega_fn, omega_id: str,
                  path: Tuple[complex, ...], lam: complex) -> VariationValue:
        weights = omega_fn(eps ** (-2.0 / 3.0) * self.zetas)
        value = float(np.sum(self.weights * self.abs_psi / weights))
        return VariationValue(path=path, lam=lam, eps=float(eps),
                              omega_id=omega_id, value=value)


def _psi_at(frame: OlverFrame, x: complex, g: complex,
            prev_root: Optional[complex]) -> Tuple[complex, complex]:
    """Error-control integrand at x by a 4th-order stencil in x.

    fhat^(1/4) is continued across the stencil (and from the previous
    path node) by nearest choice among the four roots.
    """
    h = _FD_STEP
    vs = np.empty(5, dtype=complex)
    root = prev_root
    centre_root = None
    for i, m in enumerate((-2, -1, 0, 1, 2)):
        fh = frame.fhat(x + m * h)
        root = _nearest_fourth_root(fh, root)
        vs[i] = 1.0 / root
        if m == 0:
            centre_root = root
    v2 = (-vs[0] + 16 * vs[1] - 30 * vs[2] + 16 * vs[3] - vs[4]) / (12 * h * h)
    psi = vs[2] * v2 - g * vs[2] ** 2
    return psi, centre_root


def _nearest_fourth_root(value: complex, hint: Optional[complex]) -> complex:
    root = value ** 0.25
    if hint is None:
        return root
    return max((root, 1j * root, -root, -1j * root),
               key=lambda r: -abs(r - hint))


_PROFILE_CACHE: Dict[Tuple, _PathProfile] = {}


def _profile(path, lam, c, pot) -> Tuple[_PathProfile, Tuple[complex, ...]]:
    key_path = tuple(complex(p) for p in path)
    key = (key_path, complex(lam), complex(c), id(pot))
    prof = _PROFILE_CACHE.get(key)
    if prof is None:
        prof = _PathProfile(key_path, complex(lam), complex(c), pot)
        if len(_PROFILE_CACHE) > 64:
            _PROFILE_CACHE.clear()
        _PROFILE_CACHE[key] = prof
    return prof, key_path


def variation_H(path: Sequence[complex], lam, eps, omega="balanced", *,
                c, pot: Potential = DEFAULT) -> VariationValue:
    """Variation of the error-control function along a progressive path.

    The integrand is |fhat^(-1/4) (d^2/dx^2) fhat^(-1/4) - g fhat^(-1/2)|
    damped by the balancing function Omega(eps^(-2/3) zeta); the result is
    a nonnegative arclength integral, additive over concatenation.  The
    path must stay clear of the turning point (PathObstructed) and be
    progressive: Re of the action integral monotone along it
    (NonMonotoneAction).
    """
    omega_fn, omega_id = _resolve_omega(omega)
    prof, key_path = _profile(path, lam, c, pot)
    return prof.variation(float(eps), omega_fn, omega_id, key_path,
                          complex(lam))


# -- remainder bound --------------------------------------------------------

_RHO_CACHE: Dict[Tuple[int, int, str], float] = {}
_RHO_RADII = 64
_RHO_ANGLES = 64
_RHO_RMAX = 40.0


def rho_jk(j: int, k: int, omega="balanced") -> float:
    """sup over S_j | S_k of Omega(t) M_jk(t)^2.

    Grid supremum on |t| <= 40 joined with the analytic tail bound from
    M_jk <= C_jk |t|^(-1/4) (1 + Theta(t^(3/2))); the tail is available
    for the named balancing functions (custom callables fall back to a
    wider grid).
    """
    omega_fn, omega_id = _resolve_omega(omega)
    if omega_id in ("balanced", "unit"):
        key = (j, k, omega_id)
        hit = _RHO_CACHE.get(key)
        if hit is not None:
            return hit
    rmax = _RHO_RMAX if omega_id in ("balanced", "unit") else 1.5 * _RHO_RMAX
    radii = np.geomspace(2e-2, rmax, _RHO_RADII)
    angles = np.concatenate([
        2 * math.pi * j / 3 + np.linspace(-math.pi / 3, math.pi / 3,
                                          _RHO_ANGLES // 2),
        2 * math.pi * k / 3 + np.linspace(-math.pi / 3, math.pi / 3,
                                          _RHO_ANGLES // 2),
    ])
    ts = radii[:, None] * np.exp(1j * angles[None, :])
    uj, uk, e_pair = mbf._pair_values(j, k, ts)
    m2 = (uj / e_pair) ** 2 + (e_pair * uk) ** 2
    sup = float(np.nanmax(omega_fn(ts) * m2))

    envelope = mbf.c_jk(j, k) ** 2 * (1.0 + mbf.big_theta(rmax ** 1.5)) ** 2
    if omega_id == "balanced":
        tail = envelope * (1.0 + rmax ** -2) ** 0.25
    elif omega_id == "unit":
        tail = envelope / math.sqrt(rmax)
    else:
        tail = 0.0          # grid already extends further out
    value = max(sup, tail)
    if omega_id in ("balanced", "unit"):
        _RHO_CACHE[(j, k, omega_id)] = value
    return value


def olver_error_bound(j: int, k: int, path: Sequence[complex], eps,
                      a, b, *, lam, c, pot: Potential = DEFAULT,
                      omega="balanced",
                      reference_at_infinity: bool = False) -> float:
    """Remainder bound for the solution matched to a U_j + b U_k.

    Evaluates (sigma/rho) E_jk(eps^(-2/3) zeta_end) (exp{rho eps^(2/3)
    V / (3 |lambda_jk|)} - 1) with rho the sector supremum of Omega M^2,
    sigma the path supremum of Omega M / E |a U_j + b U_k|, and V the
    variation of the error-control function along the path (the path is
    traversed from the reference end toward the evaluation point).

    With the reference point at infinity in an internal part of S_j the
    comparison is meaningful only for b = 0; otherwise the supremum
    defining sigma diverges and the bound is reported as math.inf.
    """
    if (k - j) % 3 == 0:
        raise ValueError("sector indices must differ mod 3")
    if reference_at_infinity and b != 0:
        return math.inf

    omega_fn, omega_id = _resolve_omega(omega)
    prof, key_path = _profile(path, lam, c, pot)
    var = prof.variation(float(eps), omega_fn, omega_id, key_path,
                         complex(lam)).value

    scale = float(eps) ** (-2.0 / 3.0)
    sigma = 0.0
    for zeta in prof.zetas:
        t = scale * zeta
        ev = mbf.moduli(j, k, t)
        comb = abs(a * ev.U_j + b * ev.U_k)
        sigma = max(sigma, float(omega_fn(np.asarray(t))) * ev.M_jk
                    / ev.E_jk * comb)

    rho = rho_jk(j, k, omega)
    lam_w = mbf.lambda_jk(j, k)
    e_end = mbf.weight_E_pair(j, k, scale * prof.zetas[-1])
    growth = math.expm1(min(700.0, rho * float(eps) ** (2.0 / 3.0) * var
                            / (3.0 * abs(lam_w))))
    return sigma / rho * e_end * growth


def kappa0_bound(j: int, k: int, path: Sequence[complex], eps, *, lam, c,
                 pot: Potential = DEFAULT, omega="balanced") -> float:
    """Diagnostic bound on the connection-coefficient correction kappa_0.

    |kappa_0| <= (1 + lambda_jk^2)^(1/2) (exp{rho eps^(2/3) V /
    (3 |lambda_jk|)} - 1); reported for inspection, never applied as a
    correction to the leading-order connection coefficients.
    """
    if (k - j) % 3 == 0:
        raise ValueError("sector indices must differ mod 3")
    var = variation_H(path, lam, eps, omega, c=c, pot=pot).value
    rho = rho_jk(j, k, omega)
    lam_w = mbf.lambda_jk(j, k)
    return math.sqrt(1.0 + lam_w ** 2) * math.expm1(
        min(700.0, rho * float(eps) ** (2.0 / 3.0) * var
            / (3.0 * abs(lam_w))))
