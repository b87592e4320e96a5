"""Stokes geometry: level curves of Re z, diagrams, progressive paths.

A Stokes curve of a simple turning point c is a level set Re z(x) = Re z(c)
of the action z(x) = i int_c^x sqrt(-V0); three such curves leave c at mutual
angles 2 pi / 3.  The tracer follows the unit tangent conj(w)/|w| (w the
branch-tracked sqrt(-V0)) with a transverse Newton re-projection onto the
level set each step, so long traces do not drift.

A path is progressive when Re z is strictly monotone along it; an admissible
contour is a Stokes segment joining two turning points together with
progressive tails running out to large |Re x| and then along the real axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import StallDetected
from .geometry import TurningPoint, TurningPointSet, find_turning_points
from .potential import DEFAULT, Potential
from .transport import continue_along, transport_to

WINDOW = 8.0
MAX_ARCLENGTH = 50.0
TP_PROXIMITY = 1e-4
SEED_OFFSET = 1e-4
TAIL_EXIT = 6.0
PROGRESSIVE_FLOOR = 1e-6


class Role(Enum):
    CMinus = "C-"
    C0 = "C0"
    CPlus = "C+"
    Generic = "generic"


@dataclass(frozen=True)
class Termination:
    kind: str  # "pole" | "turning-point" | "strip-boundary" | "window-boundary" | "max-length"
    where: complex = None
    label: str = None


@dataclass(frozen=True)
class StokesCurve:
    origin: str
    branch: int
    points: np.ndarray
    arclength: float
    termination: Termination
    level_residual: float

    def initial_tangent(self) -> complex:
        d = self.points[1] - self.points[0]
        return d / abs(d)


@dataclass(frozen=True)
class StokesDiagram:
    lam: complex
    tps: TurningPointSet
    curves: Tuple[StokesCurve, ...]
    connections: frozenset  # of frozenset({label_a, label_b})

    def connected(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.connections


@dataclass(frozen=True)
class Contour:
    points: np.ndarray
    role: Role = Role.Generic

    @property
    def endpoints(self) -> Tuple[complex, complex]:
        return complex(self.points[0]), complex(self.points[-1])


@dataclass(frozen=True)
class ProgressiveVerdict:
    monotone: int  # +1, -1, or 0 (not monotone)
    margin: float  # min |d Re z / ds| over the path
    progressive: bool


@dataclass(frozen=True)
class AdmissibleContour:
    pair: Tuple[str, str]
    c_minus: Contour
    c0: Contour
    c_plus: Contour


def _aligned_sqrt(x, lam, pot, ref):
    v = complex(np.sqrt(-pot.V0(x, lam)))
    return -v if abs(v - ref) > abs(v + ref) else v


def stokes_directions(tp: TurningPoint, lam, pot: Potential = DEFAULT):
    """The three departure angles of the Stokes curves at a simple zero."""
    f0 = -pot.dV0_dx(tp.x, lam)
    psi = np.angle(np.sqrt(f0))
    return [(2.0 / 3.0) * (k * np.pi - psi) for k in range(3)], np.sqrt(f0)


def _trace_one(origin: TurningPoint, branch: int, phi, sq, lam, pot,
               others: Sequence[TurningPoint]) -> StokesCurve:
    c = origin.x
    x = c + SEED_OFFSET * np.exp(1j * phi)
    # cumulative action from the local model i*(2/3)*sqrt(f0)*(x-c)^{3/2}
    z = 1j * (2.0 / 3.0) * sq * SEED_OFFSET ** 1.5 * np.exp(1.5j * phi)
    w = _aligned_sqrt(x, lam, pot, sq * np.sqrt(SEED_OFFSET) * np.exp(0.5j * phi))
    tangent = np.conj(w) / abs(w)
    sign = 1.0 if (np.conj(np.exp(1j * phi)) * tangent).real > 0 else -1.0

    pts: List[complex] = [complex(c), complex(x)]
    s = SEED_OFFSET
    ds = 1e-3
    worst = 0.0
    term = None

    while term is None:
        if pot.pole_distance(x) <= pot.pole_guard:
            im = np.mod(x.imag + np.pi / 2, np.pi) - np.pi / 2
            p = 1j * np.pi / 4 if im > 0 else -1j * np.pi / 4
            term = Termination("pole", where=p)
            break
        near = min(others, key=lambda o: abs(x - o.x), default=None)
        dmin = abs(x - near.x) if near is not None else np.inf
        if dmin < TP_PROXIMITY:
            term = Termination("turning-point", where=near.x, label=near.label)
            break
        if abs(x.imag) >= np.pi / 2:
            term = Termination("strip-boundary", where=x)
            break
        if abs(x.real) > WINDOW:
            term = Termination("window-boundary", where=x)
            break
        if s > MAX_ARCLENGTH:
            term = Termination("max-length", where=x)
            break
        if ds < 1e-10:
            raise StallDetected(
                f"step underflow tracing branch {branch} of {origin.label} "
                f"at x={x}"
            )

        h = min(ds, 0.25 * dmin + 1e-6)

        def field(xp, wp):
            return sign * np.conj(wp) / abs(wp), wp

        # classical RK4 on the unit-tangent field, branch carried stagewise
        k1, w1 = field(x, w)
        k2, w2 = field(x + 0.5 * h * k1, _aligned_sqrt(x + 0.5 * h * k1, lam, pot, w))
        k2 = sign * np.conj(w2) / abs(w2)
        w3 = _aligned_sqrt(x + 0.5 * h * k2, lam, pot, w2)
        k3 = sign * np.conj(w3) / abs(w3)
        w4 = _aligned_sqrt(x + h * k3, lam, pot, w3)
        k4 = sign * np.conj(w4) / abs(w4)
        x_new = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        w_new = _aligned_sqrt(x_new, lam, pot, w4)
        # Simpson along the chord (holomorphic integrand, so chord = path)
        w_mid = _aligned_sqrt(0.5 * (x + x_new), lam, pot, w)
        z_new = z + 1j * (w + 4 * w_mid + w_new) / 6.0 * (x_new - x)

        # transverse Newton re-projection onto Re z = 0
        r = z_new.real
        dx = -r * np.conj(1j * w_new) / abs(w_new) ** 2
        if abs(dx) > 0.5 * h or abs(r) > 1e-7:
            ds *= 0.5
            continue
        x_proj = x_new + dx
        w_proj = _aligned_sqrt(x_proj, lam, pot, w_new)
        z_proj = z_new + 1j * 0.5 * (w_new + w_proj) * dx

        x, w, z = x_proj, w_proj, z_proj
        s += abs(x - pts[-1])
        pts.append(complex(x))
        worst = max(worst, abs(z.real))
        if abs(r) < 1e-10:
            ds = min(2 * ds, 5e-3)
        elif abs(r) > 1e-8:
            ds *= 0.6

    if term.kind == "turning-point":
        pts.append(complex(term.where))
    return StokesCurve(origin.label, branch, np.array(pts), s, term, worst)


def trace_stokes_lines(tp: TurningPoint, lam, pot: Potential = DEFAULT,
                       tps: TurningPointSet = None) -> Tuple[StokesCurve, ...]:
    """The three Stokes curves leaving a simple turning point.

    Each curve is traced until it enters a pole guard disk, comes within
    1e-4 of another turning point, leaves the strip or the |Re x| <= 8
    window, or exceeds arclength 50.
    """
    lam = complex(lam)
    if tps is None:
        tps = find_turning_points(lam, pot)
    others = [p for p in tps.points if p.label != tp.label]
    phis, sq = stokes_directions(tp, lam, pot)
    return tuple(
        _trace_one(tp, k, phi, sq, lam, pot, others)
        for k, phi in enumerate(phis)
    )


def build_diagram(lam, pot: Potential = DEFAULT,
                  tps: TurningPointSet = None) -> StokesDiagram:
    """Trace every turning point's curves and record Stokes connections."""
    lam = complex(lam)
    if tps is None:
        tps = find_turning_points(lam, pot)
    curves: List[StokesCurve] = []
    conns = set()
    for p in tps.points:
        for c in trace_stokes_lines(p, lam, pot, tps):
            curves.append(c)
            if c.termination.kind == "turning-point":
                conns.add(frozenset((c.origin, c.termination.label)))
    return StokesDiagram(lam, tps, tuple(curves), frozenset(conns))


def _resample(points, max_step=2e-2) -> np.ndarray:
    pts = np.asarray(points, dtype=complex)
    out = [pts[0]]
    for p, q in zip(pts, pts[1:]):
        n = max(1, int(np.ceil(abs(q - p) / max_step)))
        out.extend(p + (q - p) * (np.arange(1, n + 1) / n))
    return np.array(out)


def is_progressive(path, lam, pot: Potential = DEFAULT) -> ProgressiveVerdict:
    """Whether Re z is strictly monotone along the path, and by what margin.

    The path (a Contour or a waypoint sequence) must keep clear of turning
    points; the branch of sqrt(-V0) is continued along it from the global
    sheet.  Margin is the minimum |d Re z / ds| over the resampled nodes.
    """
    pts = path.points if isinstance(path, Contour) else np.asarray(path, complex)
    nodes = _resample(pts)
    lam = complex(lam)
    w0 = transport_to(nodes[0], lam, pot)
    w = np.asarray(continue_along(list(nodes), w0, lam, pot))
    seg = np.diff(nodes)
    tan = seg / np.abs(seg)
    # derivative of Re z at the segment midpoints
    wmid = 0.5 * (w[:-1] + w[1:])
    deriv = (1j * wmid * tan).real
    margin = float(np.min(np.abs(deriv)))
    if np.all(deriv > 0):
        mono = 1
    elif np.all(deriv < 0):
        mono = -1
    else:
        mono = 0
    return ProgressiveVerdict(mono, margin,
                              mono != 0 and margin > PROGRESSIVE_FLOOR)


def _anti_stokes_directions(tp: TurningPoint, lam, pot):
    f0 = -pot.dV0_dx(tp.x, lam)
    psi = np.angle(np.sqrt(f0))
    return [(2.0 / 3.0) * (k * np.pi + np.pi / 2 - psi) for k in range(3)]


def _gradient_tail(tp: TurningPoint, lam, pot, outward: int):
    """Steepest-path polyline from just off tp out to |Re x| > 6, then a
    horizontal leg to the window edge; outward = -1 (left) or +1 (right)."""
    phis = _anti_stokes_directions(tp, lam, pot)
    phi = max(phis, key=lambda p: outward * np.cos(p))
    x = tp.x + 1e-3 * np.exp(1j * phi)
    w = _aligned_sqrt(x, lam, pot,
                      np.sqrt(-pot.dV0_dx(tp.x, lam)) * np.sqrt(1e-3)
                      * np.exp(0.5j * phi))
    heading = np.exp(1j * phi)
    pts = [complex(x)]
    s = 0.0
    ds = 5e-3
    while abs(x.real) <= TAIL_EXIT:
        if s > 60.0 or pot.pole_distance(x) <= pot.pole_guard:
            return None
        g = -1j * np.conj(w) / abs(w)
        if (np.conj(heading) * g).real < 0:
            g = -g
        x_mid = x + 0.5 * ds * g
        w_mid = _aligned_sqrt(x_mid, lam, pot, w)
        g2 = -1j * np.conj(w_mid) / abs(w_mid)
        if (np.conj(g) * g2).real < 0:
            g2 = -g2
        x = x + ds * g2
        w = _aligned_sqrt(x, lam, pot, w_mid)
        heading = g2
        s += ds
        pts.append(complex(x))
    pts.append(complex(outward * WINDOW, x.imag))
    return pts


def find_admissible_contour(lam, pot: Potential = DEFAULT) \
        -> Optional[AdmissibleContour]:
    """Stokes-connected pair with progressive tails to both sides, if any.

    Returns the (C-, C0, C+) triple for the first connection (preferring
    (x1, x2)) whose outward steepest paths certify as progressive; None when
    no Stokes connection exists or no tails certify.
    """
    lam = complex(lam)
    tps = find_turning_points(lam, pot)
    diagram = build_diagram(lam, pot, tps)
    pairs = sorted((tuple(sorted(c)) for c in diagram.connections))
    pairs.sort(key=lambda p: p != ("x1", "x2"))
    for a, b in pairs:
        left, right = sorted((tps[a], tps[b]), key=lambda t: t.x.real)
        c0_curve = next(
            (c for c in diagram.curves
             if c.origin in (a, b) and c.termination.kind == "turning-point"
             and c.termination.label in (a, b)),
            None)
        if c0_curve is None:
            continue
        tail_l = _gradient_tail(left, lam, pot, outward=-1)
        tail_r = _gradient_tail(right, lam, pot, outward=+1)
        if tail_l is None or tail_r is None:
            continue
        if not is_progressive(tail_l, lam, pot).progressive:
            continue
        if not is_progressive(tail_r, lam, pot).progressive:
            continue
        c_minus = Contour(np.array(tail_l[::-1] + [left.x]), Role.CMinus)
        c0_pts = c0_curve.points
        if abs(c0_pts[0] - left.x) > abs(c0_pts[0] - right.x):
            c0_pts = c0_pts[::-1]
        c_plus = Contour(np.array([right.x] + tail_r), Role.CPlus)
        return AdmissibleContour((left.label, right.label), c_minus,
                                 Contour(c0_pts, Role.C0), c_plus)
    return None
