"""Branch-consistent action integrals, the I_jk family, and the xi_c map.

The action between two points is z(beta, lam, alpha) = i * int sqrt(-V0) dt
along a polyline from alpha to beta, with the square root continued from the
global sheet (seeded at large positive x, see transport).  Endpoints that are
turning points are handled by the substitution t = endpoint + s**2, which
makes the integrand analytic there.

Value caveat for the pair (1,2): the two upper-rectangle points are joined by
a saddle connection that crosses the imaginary axis *between* x6 and x7.  A
straight chord between them crosses below x6 and lands in the wrong homotopy
class, so I_12 is integrated through a waypoint in the (x6, x7) gap; the
equivalent broken route through x6 gives I_12 = I_16 - I_26.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from .errors import (CoalescenceDetected, PathObstructed,
                     QuadratureNonconvergent)
from .geometry import (TurningPoint, TurningPointSet, double_turning_lambdas,
                       find_turning_points)
from .potential import DEFAULT, Potential
from .transport import transport_to

GUARD = 1e-3
DETOUR_RADIUS = 2e-3
_CHECKPOINTS = 400
_QUAD_TOL = 1e-12
_PAIRS = ((1, 2), (1, 6), (2, 6))


@dataclass(frozen=True)
class ActionValue:
    alpha: complex
    beta: complex
    lam: complex
    value: complex
    error: float
    path_id: str


@dataclass(frozen=True)
class ArcActionTable:
    """I_jk sampled on a lambda grid (2-D array for holomorphy checks)."""
    pair: Tuple[int, int]
    lams: np.ndarray
    values: np.ndarray

    def cauchy_riemann_residual(self) -> float:
        """Max |dI/d(conj lam)| estimated by central differences on the grid;
        small residual certifies the table varies holomorphically."""
        lam, I = self.lams, self.values
        if lam.ndim != 2 or min(lam.shape) < 3:
            raise ValueError("holomorphy check needs a 2-D grid, >=3 per side")
        ha = (lam[2:, 1:-1] - lam[:-2, 1:-1]) / 2
        hb = (lam[1:-1, 2:] - lam[1:-1, :-2]) / 2
        dIa = (I[2:, 1:-1] - I[:-2, 1:-1]) / (2 * ha)
        dIb = (I[1:-1, 2:] - I[1:-1, :-2]) / (2 * hb)
        return float(np.max(np.abs(dIa - dIb))) / 2


# most recent set per potential, to warm-start the root search at nearby lam
_last_tps: dict = {}


@lru_cache(maxsize=512)
def _tps_cached(lam: complex, pot: Potential) -> TurningPointSet:
    tps = find_turning_points(lam, pot, near=_last_tps.get(pot))
    _last_tps[pot] = tps
    return tps


def _segment_obstacles(lam, pot, endpoints, tps=None):
    """Poles and turning points that must be kept off path interiors."""
    obs = list(pot.poles)
    try:
        pts = tps if tps is not None else _tps_cached(complex(lam), pot)
        obs += [p.x for p in pts.points]
    except Exception:
        pass  # near coalescence the caller's endpoints still guard themselves
    return [o for o in obs if all(abs(o - e) > 1e-8 for e in endpoints)]


def _point_segment_distance(o, p, q):
    d = q - p
    if d == 0:
        return abs(o - p)
    t = ((o - p) * np.conj(d)).real / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return abs(o - (p + t * d))


def _route(alpha, beta, via, lam, pot, tps=None):
    """Waypoint list from alpha to beta with circular detours around any
    obstacle closer than the guard to a segment interior."""
    base = [complex(alpha)] + [complex(v) for v in via] + [complex(beta)]
    obstacles = _segment_obstacles(lam, pot, (base[0], base[-1]), tps)
    out = [base[0]]
    for p, q in zip(base, base[1:]):
        hits = [o for o in obstacles
                if _point_segment_distance(o, p, q) < GUARD
                and abs(o - p) > 1e-8 and abs(o - q) > 1e-8]
        hits.sort(key=lambda o: ((o - p) * np.conj(q - p)).real)
        for o in hits:
            # walk a half-circle of radius DETOUR_RADIUS around o; pick the
            # side whose arc stays clear of the other obstacles
            th_in = np.angle(p - o)
            th_out = np.angle(q - o)
            for sense in (1.0, -1.0):
                dth = (th_out - th_in) * sense % (2 * np.pi)
                arc = [o + DETOUR_RADIUS * np.exp(1j * (th_in + sense * dth * t))
                       for t in np.linspace(0, 1, 17)]
                clear = all(
                    min(abs(a - oo) for a in arc) > 0.5 * DETOUR_RADIUS
                    for oo in obstacles if oo is not o)
                if clear:
                    out.extend(arc)
                    break
            else:
                raise PathObstructed(
                    f"cannot route around obstacle at {o} between {p} and {q}"
                )
        out.append(q)
    return out


class _SegmentBranch:
    """Sign-consistent sqrt(-V0) along one straight segment.

    Checkpoint signs are fixed by nearest-neighbor continuity outward from a
    reference value supplied at one interior node; arbitrary-parameter
    evaluations (as issued by adaptive quadrature) snap to the nearest
    checkpoint's sign.
    """

    def __init__(self, p, q, lam, pot, w_ref, s_ref):
        self.p, self.q, self.lam, self.pot = p, q, complex(lam), pot
        s = np.linspace(0.0, 1.0, _CHECKPOINTS + 1)
        s[0], s[-1] = 1e-9, 1.0 - 1e-9
        w = np.sqrt(-pot.V0(p + (q - p) * s, lam)).astype(complex)
        j0 = int(np.argmin(np.abs(s - s_ref)))
        ref = w_ref
        for j in range(j0, len(s)):
            if abs(w[j] - ref) > abs(w[j] + ref):
                w[j] = -w[j]
            if abs(w[j]) > 1e-9:
                ref = w[j]
        ref = w[j0]
        for j in range(j0 - 1, -1, -1):
            if abs(w[j] - ref) > abs(w[j] + ref):
                w[j] = -w[j]
            if abs(w[j]) > 1e-9:
                ref = w[j]
        self.w_nodes = w

    def __call__(self, s):
        v = complex(np.sqrt(-self.pot.V0(self.p + (self.q - self.p) * s,
                                         self.lam)))
        wj = self.w_nodes[min(int(round(s * _CHECKPOINTS)), _CHECKPOINTS)]
        return -v if abs(v - wj) > abs(v + wj) else v

    @property
    def w_end(self):
        return complex(self.w_nodes[-1])


def _quad_complex(f, a, b):
    re, ere = quad(lambda t: f(t).real, a, b,
                   epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)[:2]
    im, eim = quad(lambda t: f(t).imag, a, b,
                   epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)[:2]
    err = ere + eim
    if err > 1e-8:
        raise QuadratureNonconvergent(
            f"segment quadrature error estimate {err:.2e}"
        )
    return complex(re, im), err


def _segment_integral(p, q, lam, pot, w_start, sing_p, sing_q, kernel=None):
    """(int f(w) dx over p->q, w at q, error estimate); f = identity unless a
    kernel is supplied (e.g. the density integrand 1/w)."""
    d = q - p
    if abs(d) < 1e-9:
        return 0.0 + 0.0j, w_start, 0.0
    if w_start is None:
        # fresh segment: seed the sheet off any singular endpoint
        s_ref = 0.5 if (sing_p or sing_q) else 1e-9
        w_start = transport_to(p + d * max(s_ref, 1e-4), lam, pot)
    else:
        # carried from the previous segment: w_start is the value at p, so
        # the alignment anchor must sit at s ~ 0 (anchoring a carried value
        # at the midpoint can flip the whole sheet when the phase turns by
        # more than a quarter turn along the segment)
        if sing_p:
            raise ValueError("carried branch reference into a singular "
                             "segment start")
        s_ref = 1e-9
    br = _SegmentBranch(p, q, lam, pot, w_start, s_ref)
    f = br if kernel is None else (lambda s: kernel(br(s)))

    if sing_p:
        left, e1 = _quad_complex(lambda u: f(u * u) * d * 2 * u,
                                 0.0, np.sqrt(0.5))
    else:
        left, e1 = _quad_complex(lambda s: f(s) * d, 0.0, 0.5)
    if sing_q:
        right, e2 = _quad_complex(lambda v: f(1 - v * v) * d * 2 * v,
                                  0.0, np.sqrt(0.5))
    else:
        right, e2 = _quad_complex(lambda s: f(s) * d, 0.5, 1.0)
    return left + right, br.w_end, e1 + e2


def _is_tp(x, lam, pot):
    return bool(abs(pot.V0(x, lam)) < 1e-9)


def action_integral(alpha, beta, lam, via: Sequence[complex] = (),
                    pot: Potential = DEFAULT, tps=None) -> ActionValue:
    """z(beta, lam, alpha) = i * int_alpha^beta sqrt(-V0) dt on the global
    sheet, along [alpha, *via, beta] with automatic guard detours.

    Either endpoint may be a turning point (handled by s**2 endpoint
    substitution); interior waypoints must be regular points.  ``tps`` may
    supply an already-located turning point set to spare the obstacle scan.
    """
    alpha, beta, lam = complex(alpha), complex(beta), complex(lam)
    if abs(alpha - beta) < 1e-9:
        return ActionValue(alpha, beta, lam, 0.0 + 0.0j, 0.0, "empty")
    pts = _route(alpha, beta, via, lam, pot, tps)
    total = 0.0 + 0.0j
    err = 0.0
    w = None
    for k, (p, q) in enumerate(zip(pts, pts[1:])):
        sing_p = k == 0 and _is_tp(p, lam, pot)
        sing_q = k == len(pts) - 2 and _is_tp(q, lam, pot)
        part, w, e = _segment_integral(p, q, lam, pot, w, sing_p, sing_q)
        total += part
        err += e
    path_id = "|".join(f"{p:.6g}" for p in pts)
    return ActionValue(alpha, beta, lam, 1j * total, err, path_id)


def contour_integral(alpha, beta, lam, kernel, via: Sequence[complex] = (),
                     pot: Potential = DEFAULT, tps=None) -> complex:
    """int kernel(w) dt along the same routed, branch-continued contour as
    action_integral, with w = sqrt(-V0) on the global sheet.  Endpoints may
    be turning points (kernels with an integrable 1/w singularity there are
    handled by the same endpoint substitution as the action itself)."""
    alpha, beta, lam = complex(alpha), complex(beta), complex(lam)
    if abs(alpha - beta) < 1e-9:
        return 0.0 + 0.0j
    pts = _route(alpha, beta, via, lam, pot, tps)
    total = 0.0 + 0.0j
    w = None
    for k, (p, q) in enumerate(zip(pts, pts[1:])):
        sing_p = k == 0 and _is_tp(p, lam, pot)
        sing_q = k == len(pts) - 2 and _is_tp(q, lam, pot)
        part, w, _ = _segment_integral(p, q, lam, pot, w, sing_p, sing_q,
                                       kernel=kernel)
        total += part
    return total


def gap_waypoint(lam, pot: Potential = DEFAULT) -> complex:
    """Midpoint of the (x6, x7) gap: routing through it pins the homotopy
    class of the upper-rectangle saddle connection."""
    tps = _tps_cached(complex(lam), pot)
    return (tps["x6"].x + tps["x7"].x) / 2


# label pair that collides at each double point in the upper half plane
_COALESCING_PAIR = {1: (2, 6), 2: (1, 6)}


def I_jk(lam, pair: Tuple[int, int], pot: Potential = DEFAULT,
         tps: TurningPointSet = None) -> complex:
    """Action between labeled turning points, branch fixed by continuation
    from the anchor configuration.  pair in {(1,2),(1,6),(2,6)}.

    At a double-point value whose colliding labels are exactly the requested
    pair the action is zero by coalescence; other requests there raise
    CoalescenceDetected along with the turning-point location itself.
    """
    pair = tuple(pair)
    if pair not in _PAIRS:
        raise ValueError(f"pair must be one of {_PAIRS}, got {pair}")
    lam = complex(lam)
    if tps is None:
        try:
            tps = _tps_cached(lam, pot)
        except CoalescenceDetected:
            for d in double_turning_lambdas(pot):
                if abs(lam - d.lam_D) < 1e-6 and \
                        _COALESCING_PAIR.get(d.quadrant) == pair:
                    return 0.0 + 0.0j
            raise
    if pair == (1, 2):
        via = ((tps["x6"].x + tps["x7"].x) / 2,)
        return action_integral(tps["x1"].x, tps["x2"].x, lam,
                               via=via, pot=pot, tps=tps).value
    j, k = pair
    return action_integral(tps[f"x{j}"].x, tps[f"x{k}"].x, lam,
                           pot=pot, tps=tps).value


def action_table(pair, lams, pot: Potential = DEFAULT) -> ArcActionTable:
    """Tabulate I_pair over a lambda grid (any shape; 2-D enables the
    holomorphy residual check)."""
    lams = np.asarray(lams, dtype=complex)
    vals = np.array([I_jk(l, pair, pot) for l in lams.ravel()])
    return ArcActionTable(tuple(pair), lams, vals.reshape(lams.shape))


def xi_c(x, lam, c, pot: Potential = DEFAULT) -> complex:
    """int_c^x sqrt(V0) on the branch with Re xi >= 0 (ties resolved to
    Im xi >= 0); c is a turning point.

    The sign flips exactly across the level curves Re xi = 0 through c, as
    the branch convention dictates.
    """
    cx = c.x if isinstance(c, TurningPoint) else complex(c)
    x, lam = complex(x), complex(lam)
    via = ()
    if x.real * cx.real < -1e-14:
        # opposite sides of the imaginary axis: cross inside the (x6, x7) gap
        via = (gap_waypoint(lam, pot),)
    z = action_integral(cx, x, lam, via=via, pot=pot).value
    xi = z if z.real > 0 else -z
    if abs(xi.real) < 1e-12 * (1 + abs(xi)) and xi.imag < 0:
        xi = -xi
    return xi
