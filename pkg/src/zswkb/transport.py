"""Branch-consistent transport of w = sqrt(-V0) along paths in the x-plane.

Everything action-like in this package (Stokes tracing, action integrals,
quantization) needs the square root of -V0 on a single consistent sheet.  The
sheet is pinned at the anchor point x_ref = 6 (far on the real axis, where
-V0 is within 1e-6 of lam^2) and carried along paths by sign-continuation:
at each new point the nearest of the two principal-root candidates is chosen,
with adaptive midpoint insertion whenever the step is too large to decide
safely.

Sign convention: the anchor value is w(x_ref) ~ -lam.  With this choice the
action between the two uppermost rectangle turning points at lam = 0.2i comes
out purely imaginary with positive imaginary part, which is the orientation
the quantization rules assume (quantum numbers count upward from zero).
"""

from __future__ import annotations

import numpy as np

from .errors import BranchDiscontinuity
from .potential import DEFAULT, Potential

X_REF = 6.0
_MAX_REFINE = 48


def seed(lam, pot: Potential = DEFAULT) -> complex:
    """Anchor value of sqrt(-V0) at x_ref = 6: the branch with w ~ -lam."""
    v = -pot.V0(X_REF, lam)
    return -lam * np.sqrt(v / (lam * lam))


def step_continue(w_prev: complex, x_new, lam, pot: Potential = DEFAULT) -> complex:
    """One continuation step: nearest-candidate choice at x_new."""
    pv = np.sqrt(-pot.V0(x_new, lam))
    return pv if abs(pv - w_prev) < abs(pv + w_prev) else -pv


def continue_along(points, w0, lam, pot: Potential = DEFAULT,
                   jump_frac: float = 0.25):
    """Transport w along a polyline given the value w0 at points[0].

    Inserts midpoints adaptively wherever the candidate jump exceeds
    ``jump_frac`` of the local scale, so the sign choice is always safe.
    Returns the w values at the input points only.

    Raises BranchDiscontinuity if refinement bottoms out (which happens only
    if the polyline passes essentially through a zero of V0).
    """
    pts = [complex(p) for p in points]
    out = np.empty(len(pts), dtype=complex)
    out[0] = w = complex(w0)
    for i in range(1, len(pts)):
        w = _advance(w, pts[i - 1], pts[i], lam, pot, jump_frac, 0)
        out[i] = w
    return out


def _advance(w, a, b, lam, pot, jump_frac, depth):
    pv = np.sqrt(-pot.V0(b, lam))
    scale = max(abs(w), abs(pv), 1e-300)
    if min(abs(pv - w), abs(pv + w)) < jump_frac * scale:
        return pv if abs(pv - w) < abs(pv + w) else -pv
    if depth >= _MAX_REFINE:
        raise BranchDiscontinuity(
            f"cannot continue sqrt(-V0) across [{a}, {b}] at lam={lam}"
        )
    m = (a + b) / 2
    wm = _advance(w, a, m, lam, pot, jump_frac, depth + 1)
    return _advance(wm, m, b, lam, pot, jump_frac, depth + 1)


_SAFE_LANE = 2.0


def _tree_path(x) -> list:
    """Anchor-to-x polyline: horizontal leg to (Re x, 0), then vertical.

    A vertical descent at small |Re x| would brush the potential's poles at
    +-i pi/4 once |Im x| exceeds that height, so such targets are reached by
    crossing the pole height out at a safe lane and coming in horizontally.
    """
    x = complex(x)
    path = [complex(X_REF, 0.0)]
    if abs(x.real) < 0.5 and abs(x.imag) > 0.7:
        path.append(complex(_SAFE_LANE, 0.0))
        path.append(complex(_SAFE_LANE, x.imag))
        path.append(x)
        return path
    if abs(x.real - X_REF) > 0:
        path.append(complex(x.real, 0.0))
    if abs(x.imag) > 0:
        path.append(x)
    if path[-1] != x:
        path.append(x)
    return path

def transport_to(x, lam, pot: Potential = DEFAULT) -> complex:
    """w at x on the global sheet, reached along the standard tree path.

    The standard path runs from the anchor along the real axis to Re x, then
    vertically to x.  It is safe for every x that is not itself within ~1e-6
    of a turning point; use ``transport_to_tp`` to approach turning points.
    """
    path = _tree_path(x)
    return complex(continue_along(path, seed(lam, pot), lam, pot)[-1])


def transport_to_tp(tp, lam, pot: Potential = DEFAULT, margin: float = 1e-3):
    """(x_stop, w at x_stop) on the vertical approach to a turning point,
    stopping ``margin`` short of it."""
    tp = complex(tp)
    if abs(tp.real) < 0.5 and abs(tp.imag) > 0.7:
        # approach horizontally from the safe lane (the vertical leg would
        # brush the poles at +-i pi/4)
        stop = tp + margin if tp.real <= _SAFE_LANE else tp - margin
        path = [complex(X_REF, 0.0), complex(_SAFE_LANE, 0.0),
                complex(_SAFE_LANE, tp.imag), stop]
    else:
        # stop on the vertical leg between (Re tp, 0) and tp
        stop = tp - 1j * margin if tp.imag >= 0 else tp + 1j * margin
        path = [complex(X_REF, 0.0), complex(tp.real, 0.0), stop]
    w = continue_along(path, seed(lam, pot), lam, pot)[-1]
    return stop, complex(w)


def rotate_about(tp, x_from, w_from, x_to, lam, pot: Potential = DEFAULT,
                 n_steps: int = 24):
    """Carry w around a turning point along the shorter circular arc.

    ``x_from``/``x_to`` must lie on (roughly) the same small circle around
    ``tp``; the branch is continued along the arc through ``n_steps``
    intermediate points (adaptively refined as needed).
    """
    tp = complex(tp)
    r0, r1 = x_from - tp, x_to - tp
    a0, a1 = np.angle(r0), np.angle(r1)
    da = (a1 - a0 + np.pi) % (2 * np.pi) - np.pi  # shorter way around
    ts = np.linspace(0.0, 1.0, n_steps + 1)
    radii = np.abs(r0) + (np.abs(r1) - np.abs(r0)) * ts
    angles = a0 + da * ts
    arc = tp + radii * np.exp(1j * angles)
    return complex(continue_along(arc, w_from, lam, pot)[-1])
