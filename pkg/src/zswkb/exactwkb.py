"""Resummed WKB symbols, exact solutions, and turning-point connection data.

The phase coordinate along a path is z(x) = int_alpha^x p(t) dt with
p = (g_plus*g_minus)**(1/2) continued along the path (p = i*sqrt(f) for the
principal branch off the real axis).  A path is progressive for the ``+``
family when Re z is strictly increasing along it, and for the ``-`` family
when it is strictly decreasing; only on such paths are the exponential-kernel
integrals below numerically meaningful.

Symbols are built by iterating two integral operators on a fixed composite
Gauss-Legendre grid (50 panels x 8 nodes shared by every recurrence level):

    odd_n  = I_pm[even_{n-1}]   with kernel exp(+-2(zeta - z)/eps),
    even_n = J[odd_n]           with the plain kernel,

both weighted by the logarithmic derivative script_H = d/dz log H, where
H**2 = g_minus / p.  The exponential kernel is applied with an integrating
factor per panel so every stored intermediate stays O(1) on a progressive
path.  Truncation keeps odd terms through level N and even terms through
level N-1, so N=1 gives w_even = 1 and w_odd = I[1].

A solution of the first-order system is assembled from the symbols as
u = exp(sign*z/eps) * G(x) * C(x) * (swapped symbol vector), where G is the
oscillatory gauge used by the direct-transit routines and C carries H**(+-1).
At its own symbol base the vector is exactly (1, 0), so the value there is
closed-form; continuing that value with the plain ODE reproduces the same
solution everywhere, which is how the connection triple around a simple
turning point is computed.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (BranchContinuationFailure, BranchMismatch,
                     QuadratureNonconvergent, StepUnderflow,
                     TurningPointSingularity)
from .geometry import GClass, find_turning_points
from .potential import DEFAULT, Potential

N_DEFAULT = 8
N_MAX = 12
_PANELS = 50
_NODES_PER_PANEL = 8          # 50 * 8 = 400 nodes per path
_TAIL_RTOL = 1e-12
_KERNEL_EXPONENT_LIMIT = 6.0  # max tolerable 2*|dz|/eps across one panel
_TRIVIAL_LENGTH = 1e-14
_RADIAL_PANELS = 24

__all__ = [
    "N_DEFAULT", "N_MAX",
    "WkbSymbol", "WkbSolution", "ConnectionTriple",
    "script_H", "wkb_symbols", "wkb_solution", "wronskian_pair",
    "branch_transport", "connection_triple",
]


# -- reference-panel quadrature ---------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_NODES_PER_PANEL)


def _cumulative_matrix() -> np.ndarray:
    """B with (B f)_i = integral from -1 to node_i of the interpolant of f.

    Exact for the degree-7 interpolant through the 8 Gauss-Legendre nodes
    (the discrete Legendre transform is itself exact at this degree).
    """
    n = _NODES_PER_PANEL
    vand = np.polynomial.legendre.legvander(_GL_NODES, n - 1)      # P_k(s_i)
    to_coeff = ((2 * np.arange(n) + 1) / 2)[:, None] * (vand.T * _GL_WEIGHTS)
    b = np.empty((n, n))
    for j in range(n):
        coeff = np.polynomial.legendre.legint(to_coeff[:, j])
        b[:, j] = (np.polynomial.legendre.legval(_GL_NODES, coeff)
                   - np.polynomial.legendre.legval(-1.0, coeff))
    return b


_B_REF = _cumulative_matrix()


def _panelize(waypoints: Sequence[complex], n_panels: int):
    """Split a polyline into n_panels affine panels, nodes at GL points.

    Returns (nodes, halfx, bounds): nodes is (P, 8) complex, halfx the
    per-panel half-width dx/ds, bounds the P+1 panel boundary points.
    """
    pts = [complex(w) for w in waypoints]
    segs = [(a, b) for a, b in zip(pts[:-1], pts[1:]) if abs(b - a) > 0.0]
    if not segs:
        raise ValueError("path has zero length")
    lengths = np.array([abs(b - a) for a, b in segs])
    total = lengths.sum()
    alloc = np.maximum(1, np.floor(n_panels * lengths / total).astype(int))
    while alloc.sum() > n_panels and (alloc > 1).any():
        alloc[np.argmax(alloc)] -= 1
    while alloc.sum() < n_panels:
        alloc[np.argmax(lengths / alloc)] += 1
    bounds = [segs[0][0]]
    for (a, b), m in zip(segs, alloc):
        step = (b - a) / m
        bounds.extend(a + step * (k + 1) for k in range(m))
    bounds = np.asarray(bounds, dtype=complex)
    lo, hi = bounds[:-1], bounds[1:]
    halfx = (hi - lo) / 2.0
    nodes = (lo + hi)[:, None] / 2.0 + halfx[:, None] * _GL_NODES[None, :]
    return nodes, halfx, bounds


def _continue_sqrt(values: np.ndarray, seed: complex) -> np.ndarray:
    """Square roots of `values` chosen nearest-neighbour along the sequence.

    `seed` fixes the branch at the first entry; a zero entry keeps the
    previous branch orientation (the result there is zero anyway).
    """
    flat = np.asarray(values, dtype=complex).ravel()
    out = np.empty_like(flat)
    prev = complex(seed)
    for i, v in enumerate(flat):
        r = cmath.sqrt(v)
        if abs(r - prev) > abs(r + prev):
            r = -r
        out[i] = r
        if r != 0:
            prev = r
    return out.reshape(np.shape(values))


def _seed_sqrt(value: complex, hint: Optional[complex]) -> complex:
    root = cmath.sqrt(value)
    if hint is not None and abs(root - hint) > abs(root + hint):
        root = -root
    return root


# -- pointwise quantities ----------------------------------------------------

def _h_numerator(x, lam, pot: Potential):
    """A*S'' - 2*lam*A' - A'*S', the numerator of script_H."""
    return (pot.A(x) * pot.Spp(x)
            - 2.0 * lam * pot.Aprime(x)
            - pot.Aprime(x) * pot.Sprime(x))


def script_H(x, lam, *, pot: Potential = DEFAULT, branch: Optional[complex] = None):
    """Logarithmic derivative of H = (g_minus/g_plus)**(1/4) in the phase
    coordinate: (1/4) [A S'' - 2 lam A' - A' S'] / ((lam + S'/2)**2 + A**2)**(3/2).

    `branch` is an approximate value of p = (g_plus*g_minus)**(1/2) at x and
    selects the branch of the 3/2 power consistently with a continued phase
    sheet; by default the principal branch p = i*sqrt(f) is used.

    Raises TurningPointSingularity when the denominator vanishes.
    """
    x = complex(x)
    lam = complex(lam)
    f = complex(pot.f(x, lam))
    if abs(f) < 1e-8 * (1.0 + abs(lam)) ** 2:
        raise TurningPointSingularity(
            f"script_H denominator vanishes at x={x}: |f|={abs(f):.3e}")
    p = 1j * cmath.sqrt(f)
    if branch is not None and abs(p - branch) > abs(p + branch):
        p = -p
    return -0.25j * complex(_h_numerator(x, lam, pot)) / p ** 3


def _k_matrix(x, lam, eps, pot: Potential) -> np.ndarray:
    """Coefficient matrix of the first-order system u' = (i/eps) K u.

    Off the real axis the anti-diagonal entries are the analytic
    continuations -i A exp(+iS/eps) and +i A exp(-iS/eps), not conjugates.
    """
    a = pot.A(x)
    phase = np.exp(1j * pot.S(x) / eps)
    omega = -1j * a * phase
    omega_star = 1j * a / phase
    return np.array([[-lam, omega], [omega_star, lam]], dtype=complex)


def _gauge_qc(x, eps, h, pot: Potential) -> np.ndarray:
    """G(x) @ C(x): oscillatory gauge times the H-frame columns."""
    ph = np.exp(0.5j * pot.S(x) / eps)
    hinv = 1.0 / h
    return np.array([
        [ph * (hinv + 1j * h), ph * (hinv - 1j * h)],
        [(1j * h - hinv) / ph, -(hinv + 1j * h) / ph],
    ], dtype=complex)


# -- symbol runs --------------------------------------------------------------

class _SymbolRun:
    """Phase sheet, script_H weights, and symbol sums along one grid."""

    def __init__(self, waypoints, lam, eps, *, sign, n_terms, alpha,
                 p_seed, h_seed, pot, z_base=None):
        if sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")
        if not 1 <= n_terms <= N_MAX:
            raise ValueError(f"n_terms must lie in [1, {N_MAX}]")
        self.lam = complex(lam)
        self.eps = float(eps)
        self.sign = int(sign)
        self.pot = pot
        pts = [complex(w) for w in waypoints]
        if len(pts) < 1:
            raise ValueError("path needs at least one waypoint")
        self.start = pts[0]
        self.end = pts[-1]
        length = sum(abs(b - a) for a, b in zip(pts[:-1], pts[1:]))
        self.trivial = length < _TRIVIAL_LENGTH

        prod_start = complex(pot.g_plus(self.start, self.lam)
                             * pot.g_minus(self.start, self.lam))
        p_start = _seed_sqrt(prod_start, p_seed)
        if p_seed is None and not self.trivial:
            direction = next(b - a for a, b in zip(pts[:-1], pts[1:])
                             if abs(b - a) > 0.0)
            if self.sign * (p_start * direction).real < 0:
                p_start = -p_start
        self.p_start = p_start
        self.h_start = _seed_sqrt(
            complex(pot.g_minus(self.start, self.lam)) / p_start
            if p_start != 0 else 0.0,
            h_seed)

        if z_base is not None:
            self.z_start = complex(z_base)
        elif alpha is not None:
            self.z_start = _z_radial(alpha, self.start, self.lam, p_start, pot)
        else:
            self.z_start = 0.0 + 0.0j

        if self.trivial:
            self._finish_trivial()
            return

        nodes, halfx, bounds = _panelize(pts, _PANELS)
        self.nodes, self.halfx, self.bounds = nodes, halfx, bounds
        order = np.concatenate([nodes.ravel(), bounds])
        prod = pot.g_plus(order, self.lam) * pot.g_minus(order, self.lam)
        n_flat = nodes.size
        p_all = np.empty(order.shape, dtype=complex)
        p_flat = _continue_sqrt(prod[:n_flat], p_start)
        p_all[:n_flat] = p_flat
        # boundaries: continue from the nearest preceding node
        p_prev = p_start
        for k in range(len(bounds)):
            v = cmath.sqrt(complex(prod[n_flat + k]))
            ref = p_prev if k == 0 else p_flat[k * _NODES_PER_PANEL - 1]
            if abs(v - ref) > abs(v + ref):
                v = -v
            p_all[n_flat + k] = v
        self.p = p_flat.reshape(nodes.shape)
        self.p_bounds = p_all[n_flat:]

        # H**2 = g_minus / p, continued with the same ordering
        gm = pot.g_minus(order, self.lam)
        h2 = np.divide(gm, p_all, out=np.zeros_like(p_all),
                       where=p_all != 0)
        h_flat = _continue_sqrt(h2[:n_flat], self.h_start)
        self.h = h_flat.reshape(nodes.shape)
        h_b = np.empty(len(bounds), dtype=complex)
        for k in range(len(bounds)):
            ref = self.h_start if k == 0 else h_flat[k * _NODES_PER_PANEL - 1]
            v = cmath.sqrt(complex(h2[n_flat + k]))
            if abs(v - ref) > abs(v + ref):
                v = -v
            h_b[k] = v
        self.h_bounds = h_b

        # cumulative phase: z at nodes and at panel boundaries
        self.z = np.empty_like(self.p)
        self.z_bounds = np.empty(len(bounds), dtype=complex)
        self.z_bounds[0] = self.z_start
        for j in range(_PANELS):
            pj = self.p[j]
            self.z[j] = self.z_bounds[j] + halfx[j] * (_B_REF @ pj)
            self.z_bounds[j + 1] = (self.z_bounds[j]
                                    + halfx[j] * (_GL_WEIGHTS @ pj))
        self.z_end = complex(self.z_bounds[-1])

        dz_panel = np.abs(np.diff(self.z_bounds))
        kappa = 2.0 * dz_panel.max() / self.eps
        if kappa > _KERNEL_EXPONENT_LIMIT:
            raise QuadratureNonconvergent(
                f"panel spacing cannot resolve the exponential kernel: "
                f"2*max|dz|/eps = {kappa:.2f} > {_KERNEL_EXPONENT_LIMIT}")

        # progressiveness slack: how far Re z backtracks along the grid
        re_seq = self.sign * np.concatenate(
            [[self.z_start.real], self.z.ravel().real, [self.z_end.real]])
        drift = float((np.maximum.accumulate(re_seq) - re_seq).max())
        if 2.0 * drift / self.eps > 30.0:
            raise QuadratureNonconvergent(
                "path is not progressive for this symbol family: "
                f"Re z backtracks by {drift:.3g}")

        num = _h_numerator(self.nodes, self.lam, pot)
        self.script_h = -0.25j * num / self.p ** 3
        self._iterate(n_terms)

    # -- trivial (zero-length) paths ------------------------------------

    def _finish_trivial(self):
        self.z_end = self.z_start
        self.even_end = 1.0 + 0.0j
        self.odd_end = 0.0 + 0.0j
        self.term_magnitudes: Tuple[float, ...] = ()
        self.n_used = 0
        self.p_end = self.p_start
        self.h_end = self.h_start
        self.nodes = np.empty((0, _NODES_PER_PANEL), dtype=complex)
        self.even_nodes = np.empty_like(self.nodes)
        self.odd_nodes = np.empty_like(self.nodes)
        self.z = np.empty_like(self.nodes)
        self.h = np.empty_like(self.nodes)

    # -- the two integral operators ---------------------------------------

    def _apply_plain(self, values):
        """Cumulative integral of script_H * values dz along the grid."""
        integrand = self.script_h * values * self.p
        out = np.empty_like(values)
        out_b = np.empty(_PANELS + 1, dtype=complex)
        out_b[0] = 0.0
        for j in range(_PANELS):
            g = integrand[j] * self.halfx[j]
            out[j] = out_b[j] + _B_REF @ g
            out_b[j + 1] = out_b[j] + _GL_WEIGHTS @ g
        return out, out_b

    def _apply_kernel(self, values):
        """Cumulative integral with kernel exp(sign*2*(zeta - z)/eps)."""
        two = 2.0 * self.sign / self.eps
        integrand = self.script_h * values * self.p
        out = np.empty_like(values)
        out_b = np.empty(_PANELS + 1, dtype=complex)
        out_b[0] = 0.0
        for j in range(_PANELS):
            z_a = self.z_bounds[j]
            z_b = self.z_bounds[j + 1]
            zj = self.z[j]
            psi = integrand[j] * np.exp(two * (zj - z_b)) * self.halfx[j]
            partial = _B_REF @ psi
            out[j] = (out_b[j] * np.exp(two * (z_a - zj))
                      + partial * np.exp(two * (z_b - zj)))
            out_b[j + 1] = (out_b[j] * np.exp(two * (z_a - z_b))
                            + _GL_WEIGHTS @ psi)
        return out, out_b

    # -- recurrence ---------------------------------------------------------

    def _iterate(self, n_terms):
        shape = self.nodes.shape
        even_term = np.ones(shape, dtype=complex)
        even_sum = np.ones(shape, dtype=complex)
        odd_sum = np.zeros(shape, dtype=complex)
        even_sum_b = np.ones(_PANELS + 1, dtype=complex)
        odd_sum_b = np.zeros(_PANELS + 1, dtype=complex)
        mags = []
        n_used = 0
        for level in range(1, n_terms + 1):
            odd_term, odd_b = self._apply_kernel(even_term)
            odd_sum += odd_term
            odd_sum_b += odd_b
            mags.append(abs(odd_b[-1]))
            n_used = level
            tail = abs(odd_b[-1])
            if level < n_terms:
                even_term, even_b = self._apply_plain(odd_term)
                even_sum += even_term
                even_sum_b += even_b
                mags.append(abs(even_b[-1]))
                tail = max(tail, abs(even_b[-1]))
            ref = max(abs(even_sum_b[-1]), abs(odd_sum_b[-1]), 1.0)
            if tail < _TAIL_RTOL * ref:
                break
        self._check_decay(mags, ref)
        self.even_nodes = even_sum
        self.odd_nodes = odd_sum
        self.even_bounds = even_sum_b
        self.odd_bounds = odd_sum_b
        self.even_end = complex(even_sum_b[-1])
        self.odd_end = complex(odd_sum_b[-1])
        self.term_magnitudes = tuple(mags)
        self.n_used = n_used
        self.p_end = complex(self.p_bounds[-1])
        self.h_end = complex(self.h_bounds[-1])

    @staticmethod
    def _check_decay(mags, ref):
        floor = 1e-11 * ref
        growth = 0
        for prev, cur in zip(mags[2:], mags[3:]):
            if cur > 1.5 * prev and cur > floor:
                growth += 1
                if growth >= 2:
                    raise QuadratureNonconvergent(
                        "symbol terms grow instead of decaying; the grid "
                        "cannot resolve the kernel at this eps "
                        f"(magnitudes {[f'{m:.2e}' for m in mags]})")
            else:
                growth = 0


def _z_chord(a, b, lam, p_at_b, pot):
    """(int_a^b p dt, p(a)) along the straight chord, branch seeded at b.

    Panels are kept short so the quadrature stays spectrally accurate even
    when the chord passes at moderate distance from another branch point.
    """
    a = complex(a)
    b = complex(b)
    if abs(b - a) < _TRIVIAL_LENGTH:
        return 0.0 + 0.0j, complex(p_at_b)
    n_panels = max(8, int(math.ceil(abs(b - a) / 0.08)))
    nodes, halfx, _ = _panelize([a, b], n_panels)
    flat = nodes.ravel()
    prod = pot.g_plus(flat, lam) * pot.g_minus(flat, lam)
    p = _continue_sqrt(prod[::-1], p_at_b)[::-1].reshape(nodes.shape)
    total = complex((halfx * (p @ _GL_WEIGHTS)).sum())
    return total, complex(p.ravel()[0])


def _z_radial(alpha, x, lam, p_at_x, pot, n_panels=_RADIAL_PANELS,
              reach=0.3):
    """Phase z(x) = int_alpha^x p dt, referenced to a turning point alpha.

    The leg within `reach` of alpha uses the substitution
    t = alpha + u**2 (x - alpha), which makes the integrand analytic at a
    simple turning point; any longer leg is covered by short straight-chord
    panels so that other nearby branch points cannot spoil the accuracy.
    The branch is continued inward from p(x) = p_at_x.
    """
    alpha = complex(alpha)
    x = complex(x)
    if abs(x - alpha) < _TRIVIAL_LENGTH:
        return 0.0 + 0.0j
    if abs(x - alpha) > 1.25 * reach:
        mid = alpha + reach * (x - alpha) / abs(x - alpha)
        outer, p_mid = _z_chord(mid, x, lam, p_at_x, pot)
        return _z_radial(alpha, mid, lam, p_mid, pot, n_panels) + outer
    span = x - alpha
    total = 0.0 + 0.0j
    prev = complex(p_at_x)
    edges = np.linspace(1.0, 0.0, n_panels + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):          # lo > hi, sweep inward
        mid = (lo + hi) / 2.0
        half = (lo - hi) / 2.0
        u = mid + half * _GL_NODES[::-1]               # descending toward alpha
        t = alpha + u ** 2 * span
        prod = pot.g_plus(t, lam) * pot.g_minus(t, lam)
        p = _continue_sqrt(prod, prev)
        nz = np.nonzero(p)[0]
        if nz.size:
            prev = complex(p[nz[-1]])
        total += (_GL_WEIGHTS[::-1] @ (p * 2.0 * u * span)) * half
    return total


# -- public symbol / solution types ------------------------------------------

@dataclass(frozen=True, eq=False)
class WkbSymbol:
    """Partial sums of the resummed symbol series at the end of a path."""
    z0: complex
    z: complex
    eps: float
    n_terms: int
    sign: int
    w_even: complex
    w_odd: complex
    term_magnitudes: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class WkbSolution:
    """One exact solution of the first-order system, with its symbol data.

    `value` is the 2-vector at `x`; the node arrays kept on the private
    fields let `system_residual` differentiate the solution along its own
    path without re-running the quadrature.
    """
    x: complex
    lam: complex
    eps: float
    alpha: complex
    x0: complex
    sign: int
    value: np.ndarray
    symbol: WkbSymbol
    z0: complex
    z_end: complex
    p_at_base: complex
    h_at_base: complex
    p_at_x: complex
    h_at_x: complex
    pot: Potential = DEFAULT
    _xs: np.ndarray = field(default=None, repr=False)
    _us: np.ndarray = field(default=None, repr=False)

    def system_residual(self, n_samples: int = 5) -> float:
        """Max relative defect of u' = (i/eps) K u along the stored nodes,
        differentiated with local 7-point rules on the complex grid."""
        xs = self._xs
        us = self._us
        if xs is None or len(xs) < 9:
            raise ValueError("solution carries no path data to differentiate")
        idx = np.linspace(4, len(xs) - 5, n_samples).astype(int)
        worst = 0.0
        for i in idx:
            sl = slice(i - 3, i + 4)
            du = np.array([
                _fd_derivative(xs[sl], us[0, sl], xs[i]),
                _fd_derivative(xs[sl], us[1, sl], xs[i]),
            ])
            k = _k_matrix(xs[i], self.lam, self.eps, self.pot)
            res = du - (1j / self.eps) * (k @ us[:, i])
            scale = 1.0 + float(np.linalg.norm(us[:, i]))
            worst = max(worst, float(np.linalg.norm(res)) / scale)
        return worst


def _fd_derivative(xs, ys, x0):
    """Derivative at x0 of the polynomial through (xs, ys), complex nodes."""
    n = len(xs)
    d = 0.0 + 0.0j
    for j in range(n):
        # derivative of the j-th Lagrange basis at x0
        basis = 0.0 + 0.0j
        for m in range(n):
            if m == j:
                continue
            term = 1.0 / (xs[j] - xs[m])
            for k in range(n):
                if k in (j, m):
                    continue
                term *= (x0 - xs[k]) / (xs[j] - xs[k])
            basis += term
        d += ys[j] * basis
    return d


def wkb_symbols(path: Sequence[complex], lam, eps, *, sign: int = +1,
                n_terms: int = N_DEFAULT, alpha: Optional[complex] = None,
                p_seed: Optional[complex] = None,
                h_seed: Optional[complex] = None,
                pot: Potential = DEFAULT) -> WkbSymbol:
    """Resummed symbol sums along a polyline from path[0] to path[-1].

    The branch of p is seeded with `p_seed` (nearest square root wins) or,
    by default, chosen so the path is progressive for the requested family.
    `alpha` anchors the phase origin (z = 0 there); without it the phase is
    referenced to the path start.
    """
    run = _SymbolRun(path, lam, eps, sign=sign, n_terms=n_terms, alpha=alpha,
                     p_seed=p_seed, h_seed=h_seed, pot=pot)
    return WkbSymbol(z0=run.z_start, z=run.z_end, eps=float(eps),
                     n_terms=run.n_used, sign=run.sign,
                     w_even=run.even_end, w_odd=run.odd_end,
                     term_magnitudes=run.term_magnitudes)


def wkb_solution(x, lam, eps, *, alpha, x0, sign: int = +1,
                 path: Optional[Sequence[complex]] = None,
                 n_terms: int = N_DEFAULT,
                 p_seed: Optional[complex] = None,
                 h_seed: Optional[complex] = None,
                 pot: Potential = DEFAULT) -> WkbSolution:
    """Exact solution with symbol base x0 and phase base alpha, at x.

    The symbol path defaults to the straight segment [x0, x]; pass explicit
    waypoints when that segment is not progressive or skirts a turning
    point.  Seeds fix the phase/H branch at x0; see `branch_transport` for
    carrying one solution's branch to another base point.
    """
    x = complex(x)
    x0 = complex(x0)
    if path is None:
        path = (x0, x)
    pts = [complex(w) for w in path]
    if abs(pts[0] - x0) > 1e-12 * (1.0 + abs(x0)):
        raise ValueError("path must start at the symbol base x0")
    if abs(pts[-1] - x) > 1e-12 * (1.0 + abs(x)):
        raise ValueError("path must end at the evaluation point x")
    run = _SymbolRun(pts, lam, eps, sign=sign, n_terms=n_terms, alpha=alpha,
                     p_seed=p_seed, h_seed=h_seed, pot=pot)
    symbol = WkbSymbol(z0=run.z_start, z=run.z_end, eps=float(eps),
                       n_terms=run.n_used, sign=run.sign,
                       w_even=run.even_end, w_odd=run.odd_end,
                       term_magnitudes=run.term_magnitudes)
    value = _assemble_value(run, run.end, run.z_end, run.h_end,
                            run.even_end, run.odd_end)
    if run.trivial:
        xs = us = None
    else:
        xs = run.nodes.ravel()
        evens = run.even_nodes.ravel()
        odds = run.odd_nodes.ravel()
        zs = run.z.ravel()
        hs = run.h.ravel()
        us = np.empty((2, xs.size), dtype=complex)
        for i in range(xs.size):
            us[:, i] = _assemble_value(run, xs[i], zs[i], hs[i],
                                       evens[i], odds[i])
    return WkbSolution(
        x=x, lam=complex(lam), eps=float(eps), alpha=complex(alpha),
        x0=x0, sign=run.sign, value=value, symbol=symbol,
        z0=run.z_start, z_end=run.z_end,
        p_at_base=run.p_start, h_at_base=run.h_start,
        p_at_x=run.p_end, h_at_x=run.h_end,
        pot=pot, _xs=xs, _us=us)


def _assemble_value(run, x, z, h, even, odd) -> np.ndarray:
    if h == 0:
        raise TurningPointSingularity(
            f"H vanishes at x={x}; cannot assemble a solution value there")
    vec = np.array([odd, even] if run.sign > 0 else [even, odd],
                   dtype=complex)
    qc = _gauge_qc(x, run.eps, h, run.pot)
    return np.exp(run.sign * z / run.eps) * (qc @ vec)


def branch_transport(start, end, lam, p_seed, h_seed=None, *,
                     via: Sequence[complex] = (),
                     pot: Potential = DEFAULT,
                     samples_per_unit: int = 400) -> Tuple[complex, complex]:
    """Continue the (p, H) branch pair from `start` to `end` along a polyline.

    Returns (p_end, h_end).  Use this to build branch-consistent solution
    pairs with different symbol bases.
    """
    pts = [complex(start), *map(complex, via), complex(end)]
    p_prev = complex(p_seed)
    prod0 = complex(pot.g_plus(pts[0], lam) * pot.g_minus(pts[0], lam))
    p_prev = _seed_sqrt(prod0, p_prev)
    if h_seed is None:
        h_prev = _seed_sqrt(complex(pot.g_minus(pts[0], lam)) / p_prev, None)
    else:
        h_prev = complex(h_seed)
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(8, int(samples_per_unit * abs(b - a)))
        ts = np.linspace(0.0, 1.0, n + 1)[1:]
        xs = a + ts * (b - a)
        prod = pot.g_plus(xs, lam) * pot.g_minus(xs, lam)
        p_line = _continue_sqrt(prod, p_prev)
        h2 = np.divide(pot.g_minus(xs, lam), p_line,
                       out=np.zeros_like(p_line), where=p_line != 0)
        h_line = _continue_sqrt(h2, h_prev)
        nz = np.nonzero(p_line)[0]
        if nz.size == 0:
            raise BranchContinuationFailure(
                f"p vanishes along the whole segment {a} -> {b}")
        p_prev = complex(p_line[-1]) if p_line[-1] != 0 else complex(p_line[nz[-1]])
        h_prev = complex(h_line[-1]) if h_line[-1] != 0 else complex(h_line[nz[-1]])
    return p_prev, h_prev


# -- Wronskians ---------------------------------------------------------------

def _wronskian(u, v) -> complex:
    return complex(u[0] * v[1] - u[1] * v[0])


def wronskian_pair(sol_a: WkbSolution, sol_b: WkbSolution, *,
                   sym_path: Optional[Sequence[complex]] = None,
                   rtol: float = 1e-8) -> complex:
    """Wronskian of two exact solutions sharing phase base and branch.

    Cross-checks the determinant against the symbol prediction
    (4i*w_even for a +- pair, -4i*exp(2 z1/eps)*w_odd for ++, the mirrored
    forms otherwise) and raises BranchMismatch when they disagree --
    which is exactly what happens when the two solutions were built on
    inconsistent phase or H branches.
    """
    for attr in ("lam", "eps", "alpha"):
        if abs(getattr(sol_a, attr) - getattr(sol_b, attr)) > 1e-12:
            raise BranchMismatch(
                f"solutions disagree on {attr}: "
                f"{getattr(sol_a, attr)} vs {getattr(sol_b, attr)}")
    if sol_a.pot != sol_b.pot:
        raise BranchMismatch("solutions built on different potentials")
    if abs(sol_a.x - sol_b.x) > 1e-9 * (1.0 + abs(sol_a.x)):
        raise BranchMismatch(
            f"Wronskian needs a common evaluation point: "
            f"{sol_a.x} vs {sol_b.x}")
    w = _wronskian(sol_a.value, sol_b.value)

    pair = (sol_a.sign, sol_b.sign)
    if pair == (+1, -1):
        pred = 4j * _even_between(sol_a, sol_b, sym_path)
    elif pair == (-1, +1):
        pred = -4j * _even_between(sol_b, sol_a, sym_path)
    else:
        run = _run_between(sol_a, sol_b, sym_path, sign=sol_a.sign)
        if pair == (+1, +1):
            pred = -4j * np.exp(2.0 * run.z_end / sol_a.eps) * run.odd_end
        else:
            pred = 4j * np.exp(-2.0 * run.z_end / sol_a.eps) * run.odd_end
    if abs(w - pred) > rtol * max(abs(w), abs(pred)) + 1e-280:
        raise BranchMismatch(
            f"Wronskian {w} disagrees with the symbol prediction {pred}; "
            "the two solutions do not live on one branch")
    return w


def _run_between(sol_from: WkbSolution, sol_to: WkbSolution, sym_path,
                 sign: int) -> _SymbolRun:
    path = (sym_path if sym_path is not None
            else (sol_from.x0, sol_to.x0))
    pts = [complex(p) for p in path]
    if abs(pts[0] - sol_from.x0) > 1e-9 or abs(pts[-1] - sol_to.x0) > 1e-9:
        raise ValueError("sym_path must join the two symbol bases")
    return _SymbolRun(pts, sol_from.lam, sol_from.eps, sign=sign,
                      n_terms=N_DEFAULT, alpha=None,
                      p_seed=sol_from.p_at_base, h_seed=sol_from.h_at_base,
                      pot=sol_from.pot, z_base=sol_from.z0)


def _even_between(sol_plus: WkbSolution, sol_minus: WkbSolution,
                  sym_path) -> complex:
    run = _run_between(sol_plus, sol_minus, sym_path, sign=+1)
    return run.even_end


# -- connection triple around a simple turning point ---------------------------

@dataclass(frozen=True, eq=False)
class ConnectionTriple:
    """The three sector solutions around a simple turning point and their
    pairwise Wronskians, evaluated by plain ODE continuation of the exact
    closed-form values each solution takes at its own symbol base."""
    lam: complex
    eps: float
    label: str
    alpha: complex
    gclass: GClass
    rays: Tuple[float, float, float]          # Stokes directions, l1 first
    radius: float
    base_points: Tuple[complex, complex, complex]
    z_bases: Tuple[complex, complex, complex]
    p_seeds: Tuple[complex, complex, complex]
    h_seeds: Tuple[complex, complex, complex]
    w01: complex
    w12: complex
    w20: complex
    dependence_residual: float
    wronskian_spread: float
    samples: Tuple[complex, ...]

    @property
    def expected(self) -> Tuple[complex, complex, complex]:
        third = 2.0 if self.gclass is GClass.gMinusZero else -2.0
        return (2j, -2j, complex(third))

    @property
    def deviations(self) -> Tuple[float, float, float]:
        e = self.expected
        return (abs(self.w01 - e[0]), abs(self.w12 - e[1]),
                abs(self.w20 - e[2]))


def _f_prime(x, lam, pot: Potential):
    return ((lam + 0.5 * pot.Sprime(x)) * pot.Spp(x)
            + 2.0 * pot.A(x) * pot.Aprime(x))


def _v_transit(v0, xa, xb, lam, eps, pot, rtol=1e-12):
    """Continue a solution of the H-free frame v' = (i/eps) M v along the
    straight segment xa -> xb."""
    xa = complex(xa)
    xb = complex(xb)
    span = xb - xa
    if abs(span) < _TRIVIAL_LENGTH:
        return np.asarray(v0, dtype=complex)
    i_over = 1j / eps

    def rhs(t, y):
        xt = xa + t * span
        gp = pot.g_plus(xt, lam)
        gm = pot.g_minus(xt, lam)
        return [i_over * span * gp * y[1], -i_over * span * gm * y[0]]

    scale = float(np.max(np.abs(v0))) or 1.0
    sol = solve_ivp(rhs, (0.0, 1.0), np.asarray(v0, dtype=complex),
                    method="DOP853", rtol=rtol, atol=1e-14 * scale,
                    dense_output=False)
    if not sol.success:
        raise StepUnderflow(f"frame transit {xa} -> {xb} failed: {sol.message}")
    return sol.y[:, -1]


def connection_triple(lam, eps, *, label: str = "x1", radius: float = 0.35,
                      pot: Potential = DEFAULT, rtol: float = 1e-12,
                      _retries: int = 3) -> ConnectionTriple:
    """Build the three exact solutions attached to the Stokes sectors of a
    simple turning point and return their pairwise Wronskians.

    Sector base points sit at `radius` from the turning point along the
    bisectors of the local Stokes directions; the branch cut is placed on
    the first Stokes ray (smallest angle), and the phase branch is fixed by
    requiring Re z < 0 at the base point of the sector adjacent to the cut.
    """
    lam = complex(lam)
    eps = float(eps)
    tps = find_turning_points(lam, pot=pot)
    tp = tps[label]
    alpha = complex(tp.x)

    c2 = complex(-_f_prime(alpha, lam, pot))       # (g_plus g_minus)'(alpha)
    if abs(c2) < 1e-8:
        raise TurningPointSingularity(
            f"{label} at lam={lam} is not a simple turning point")
    phi_c = cmath.phase(cmath.sqrt(c2))
    rays = sorted(((2.0 / 3.0) * (0.5 * math.pi + k * math.pi - phi_c))
                  % (2.0 * math.pi) for k in range(3))

    last_err = None
    for attempt in range(_retries):
        r = radius * (0.75 ** attempt)
        try:
            return _build_triple(lam, eps, label, alpha, tp.gclass,
                                 tuple(rays), r, pot, rtol)
        except BranchContinuationFailure as err:    # sector signs off: shrink
            last_err = err
    raise last_err


def _build_triple(lam, eps, label, alpha, gclass, rays, r, pot, rtol):
    two_pi = 2.0 * math.pi
    l1, l2, l0 = rays
    # sector 0 sits between the cut l1 and its clockwise neighbour l0;
    # sector 1 (the only one with Re z > 0) is opposite the cut; sector 2
    # fills the remaining wedge between l1 and l2
    phis = (((l0 + (l1 + two_pi)) / 2.0) % two_pi,
            (l2 + l0) / 2.0,
            (l1 + l2) / 2.0)
    bases = tuple(alpha + r * cmath.exp(1j * phi) for phi in phis)
    pot.check_guard(np.array(bases))

    # branch seed in sector 0, normalized by Re z(x0) < 0
    p0 = 1j * cmath.sqrt(complex(pot.f(bases[0], lam)))
    z0 = _z_radial(alpha, bases[0], lam, p0, pot)
    if z0.real > 0:
        p0, z0 = -p0, -z0
    h0 = _seed_sqrt(complex(pot.g_minus(bases[0], lam)) / p0, None)

    # carry the branch clockwise along the circle of radius r,
    # crossing l0 then l2 but never the cut on l1
    p_seeds = [p0, None, None]
    h_seeds = [h0, None, None]
    z_bases = [z0, None, None]
    p_prev, h_prev = p0, h0
    for j in (1, 2):
        span = (phis[j - 1] - phis[j]) % two_pi
        arc = alpha + r * np.exp(1j * (phis[j - 1]
                                       - span * np.linspace(0, 1, 241)[1:]))
        prod = pot.g_plus(arc, lam) * pot.g_minus(arc, lam)
        p_line = _continue_sqrt(prod, p_prev)
        h2 = pot.g_minus(arc, lam) / p_line
        h_line = _continue_sqrt(h2, h_prev)
        p_prev, h_prev = complex(p_line[-1]), complex(h_line[-1])
        p_seeds[j], h_seeds[j] = p_prev, h_prev
        z_bases[j] = _z_radial(alpha, bases[j], lam, p_prev, pot)

    if not (z_bases[1].real > 0 and z_bases[2].real < 0):
        raise BranchContinuationFailure(
            f"sector sign pattern violated at radius {r:.3f}: "
            f"Re z = {[f'{z.real:+.4f}' for z in z_bases]} "
            "(Stokes curvature; retry with a smaller radius)")

    # closed-form values at the symbol bases: the symbol there is (1, 0)
    signs = (+1, -1, +1)
    v_base = []
    for j in range(3):
        h = h_seeds[j]
        col = np.array([1.0 / h, -1j * h] if signs[j] > 0
                       else [1.0 / h, 1j * h], dtype=complex)
        v_base.append(np.exp(signs[j] * z_bases[j] / eps) * col)

    samples = (alpha,
               alpha + 0.25 * r * cmath.exp(1j * phis[0]),
               alpha + 0.25 * r * cmath.exp(1j * phis[1]))
    v_at = [[_v_transit(v_base[j], bases[j], s, lam, eps, pot, rtol)
             for s in samples] for j in range(3)]

    def wr(i, j, k):
        # reported in the diagonalizing frame, where two opposite-type
        # solutions sharing a base have Wronskian exactly 2i; the
        # oscillatory-gauge determinant is twice this
        return _wronskian(v_at[i][k], v_at[j][k])

    w01, w12, w20 = wr(0, 1, 0), wr(1, 2, 0), wr(2, 0, 0)
    spread = 0.0
    for (i, j), ref in (((0, 1), w01), ((1, 2), w12), ((2, 0), w20)):
        for k in (1, 2):
            spread = max(spread, abs(wr(i, j, k) - ref) / abs(ref))

    dep = 0.0
    for k, s in enumerate(samples):
        # the dependence identity is frame-independent; evaluate it in the
        # oscillatory gauge u = G v so the reported residual refers to the
        # first-order system the solutions actually satisfy
        gm = _gauge_matrix(s, eps, pot)
        u = [gm @ v_at[j][k] for j in range(3)]
        resid = np.linalg.norm(w12 * u[0] + w20 * u[1] + w01 * u[2])
        dep = max(dep, float(resid / max(np.linalg.norm(ui) for ui in u)))

    return ConnectionTriple(
        lam=lam, eps=eps, label=label, alpha=alpha, gclass=gclass,
        rays=(l1, l2, l0), radius=r, base_points=bases,
        z_bases=tuple(z_bases), p_seeds=tuple(p_seeds),
        h_seeds=tuple(h_seeds), w01=w01, w12=w12, w20=w20,
        dependence_residual=dep, wronskian_spread=spread, samples=samples)


def _gauge_matrix(x, eps, pot: Potential) -> np.ndarray:
    ph = np.exp(0.5j * pot.S(x) / eps)
    return np.array([[ph, ph], [-1.0 / ph, 1.0 / ph]], dtype=complex)
