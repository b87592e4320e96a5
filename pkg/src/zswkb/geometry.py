"""Turning points: location, labeling, classification, and double points.

For every lam off the four double-point values, V0(., lam) has exactly eight
simple zeros in the fundamental strip.  On the upper imaginary axis (below
the arc junction) four of them form a rectangle symmetric under x -> -x*
(labels x1..x4: x1 negative-Re upper, x2 = -x1*, x3 negative-Re lower,
x4 = -x3*) and four sit on the imaginary axis (x5 < x6 < x7 < x8 by height,
one per quarter-strip between the poles and the strip boundary).

Away from the imaginary axis there is no geometric rule: labels are defined
by homotopy continuation from the anchor configuration at lam = 0.2i along
the L-shaped path in lam (horizontal first, then vertical).  Continuation is
refused near the double points, where two differently-labeled roots collide.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np

from .errors import AmbiguousClass, CoalescenceDetected, RootCountMismatch
from .potential import DEFAULT, Potential

ANCHOR_LAM = 0.2j
COALESCE_TOL = 1e-5
DEDUP_TOL = 1e-6
CONTINUATION_STEP = 1e-2
_SWEEP_RE = 60
_SWEEP_IM = 30
_RE_WINDOW = 4.0

LABELS = ("x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8")


class GClass(Enum):
    gMinusZero = "gMinusZero"
    gPlusZero = "gPlusZero"


# the fixed class assignment of the eight labels
LABEL_CLASS = {
    "x1": GClass.gMinusZero, "x2": GClass.gMinusZero,
    "x6": GClass.gMinusZero, "x8": GClass.gMinusZero,
    "x3": GClass.gPlusZero, "x4": GClass.gPlusZero,
    "x5": GClass.gPlusZero, "x7": GClass.gPlusZero,
}


@dataclass(frozen=True)
class TurningPoint:
    x: complex
    label: str
    gclass: GClass
    multiplicity: int = 1


@dataclass(frozen=True)
class TurningPointSet:
    lam: complex
    points: Tuple[TurningPoint, ...]
    provenance: str

    def __getitem__(self, label: str) -> TurningPoint:
        for p in self.points:
            if p.label == label:
                return p
        raise KeyError(label)

    def ordered(self) -> List[TurningPoint]:
        return sorted(self.points, key=lambda p: p.label)


@dataclass(frozen=True)
class DoublePointDatum:
    lam_D: complex
    x_D: complex
    sigma: int
    tau: int
    quadrant: int


def _newton_polish(x0, lam, pot, iters=60, damp_until=8):
    """Vectorized damped Newton on V0; returns polished points (NaN-safe)."""
    x = np.asarray(x0, dtype=complex).copy()
    for it in range(iters):
        v = pot.V0(x, lam)
        dv = pot.dV0_dx(x, lam)
        step = np.where(dv != 0, v / np.where(dv != 0, dv, 1.0), 0.0)
        mag = np.abs(step)
        step = np.where(mag > 0.3, step * (0.3 / np.maximum(mag, 1e-300)), step)
        if it < damp_until:
            step = 0.7 * step
        x = x - step
        if it > 12 and np.all((np.abs(v) < 1e-14) | ~np.isfinite(v)):
            break
    return x


def _fold_strip(x):
    im = np.mod(np.asarray(x).imag + np.pi / 2, np.pi) - np.pi / 2
    # fold into (-pi/2, pi/2]
    im = np.where(im <= -np.pi / 2 + 1e-15, im + np.pi, im)
    return np.asarray(x).real + 1j * im


def _cyl_dist(a, b):
    """Distance on the cylinder (strip with Im x ~ Im x + pi identified);
    the zero set is i*pi-periodic, so roots live naturally on the quotient."""
    d = np.asarray(a) - np.asarray(b)
    im = np.mod(d.imag + np.pi / 2, np.pi) - np.pi / 2
    return np.abs(d.real + 1j * im)


def _sweep_roots(lam, pot: Potential) -> np.ndarray:
    """All zeros of V0(., lam) in the strip with |Re x| <= window."""
    re = np.linspace(-_RE_WINDOW, _RE_WINDOW, _SWEEP_RE)
    im = np.linspace(-np.pi / 2 + 0.03, np.pi / 2 - 0.03, _SWEEP_IM)
    seeds = (re[:, None] + 1j * im[None, :]).ravel()
    # keep seeds off the pole guards
    seeds = seeds[pot.pole_distance(seeds) > 5 * pot.pole_guard]
    x = _newton_polish(seeds, lam, pot)
    x = x[np.isfinite(x)]
    x = _fold_strip(x)
    ok = (np.abs(pot.V0(x, lam)) < 1e-11) & (np.abs(x.real) < _RE_WINDOW + 0.5)
    ok &= pot.pole_distance(x) > pot.pole_guard
    x = x[ok]
    roots: List[complex] = []
    for xi in x:
        if not any(_cyl_dist(xi, r) < DEDUP_TOL for r in roots):
            roots.append(complex(xi))
    return np.array(sorted(roots, key=lambda z: (round(z.real, 9), z.imag)))


def classify_zero(x, lam, pot: Potential = DEFAULT) -> GClass:
    """Which factor of V0 = gminus*gplus vanishes at the turning point x."""
    gm, gp = abs(pot.g_minus(x, lam)), abs(pot.g_plus(x, lam))
    small, large = min(gm, gp), max(gm, gp)
    if small > 1e-8 or large < 1e-4:
        raise AmbiguousClass(
            f"|g-|={gm:.3e}, |g+|={gp:.3e} at x={x}: cannot classify"
        )
    return GClass.gMinusZero if gm < gp else GClass.gPlusZero


def _label_imag_axis(lam, roots, pot) -> Dict[str, complex]:
    """Geometric labeling, valid for purely imaginary lam below the junction
    region (this is the anchor rule that continuation propagates)."""
    rect = [r for r in roots if abs(r.real) > 1e-7]
    axis = sorted((r for r in roots if abs(r.real) <= 1e-7), key=lambda r: r.imag)
    if len(rect) != 4 or len(axis) != 4:
        raise RootCountMismatch(
            f"expected 4 rectangle + 4 axis roots at lam={lam}, "
            f"got {len(rect)}+{len(axis)}"
        )
    neg = sorted((r for r in rect if r.real < 0), key=lambda r: -r.imag)
    pos = sorted((r for r in rect if r.real > 0), key=lambda r: -r.imag)
    return {
        "x1": neg[0], "x2": pos[0], "x3": neg[1], "x4": pos[1],
        "x5": axis[0], "x6": axis[1], "x7": axis[2], "x8": axis[3],
    }


def _track_labels(lam_target, pot, step=CONTINUATION_STEP) -> Dict[str, complex]:
    """Continue the anchor labeling to lam_target along the L-shaped path."""
    anchor_roots = _sweep_roots(ANCHOR_LAM, pot)
    labels = _label_imag_axis(ANCHOR_LAM, anchor_roots, pot)
    names = list(labels.keys())
    x = np.array([labels[k] for k in names], dtype=complex)

    # L-shaped path: horizontal (vary Re) then vertical (vary Im)
    mid = complex(lam_target.real, ANCHOR_LAM.imag)
    for a, b in ((ANCHOR_LAM, mid), (mid, complex(lam_target))):
        d = b - a
        n = max(1, int(np.ceil(abs(d) / step)))
        for k in range(1, n + 1):
            lam_k = a + d * (k / n)
            x = _fold_strip(_newton_polish(x, lam_k, pot, iters=20, damp_until=0))
            # label collision = continuation became meaningless
            sep = _cyl_dist(x[:, None], x[None, :]) + np.eye(len(x))
            if sep.min() < COALESCE_TOL:
                raise CoalescenceDetected(
                    f"labels collide at lam={lam_k} along the continuation path"
                )
    return dict(zip(names, x))


def _warm_continue(lam, pot, near: "TurningPointSet"):
    """Polish the labeled roots of a nearby set onto the new lam; returns a
    label map or None when any safety check fails (caller then cold-solves).

    The checks guarantee the warm path can only reproduce what label
    continuation would: every polished root must keep its seed's symbol
    class, stay well inside its seed's separation disk, and the eight roots
    must stay pairwise distinct.
    """
    names = [p.label for p in near.points]
    seeds = np.array([p.x for p in near.points], dtype=complex)
    sep0 = _cyl_dist(seeds[:, None], seeds[None, :]) + 10 * np.eye(len(seeds))
    x = _fold_strip(_newton_polish(seeds, lam, pot, iters=25, damp_until=0))
    if not np.all(np.isfinite(x)):
        return None
    if np.any(np.abs(pot.V0(x, lam)) > 1e-11):
        return None
    if np.any(_cyl_dist(x, seeds) > 0.45 * sep0.min(axis=1)):
        return None
    sep = _cyl_dist(x[:, None], x[None, :]) + 10 * np.eye(len(x))
    if sep.min() < COALESCE_TOL:
        raise CoalescenceDetected(
            f"two turning points within {COALESCE_TOL} at lam={lam}")
    if np.any(pot.pole_distance(x) <= pot.pole_guard):
        return None
    try:
        for xi, p in zip(x, near.points):
            if classify_zero(xi, lam, pot) != p.gclass:
                return None
    except AmbiguousClass:
        return None
    return dict(zip(names, x))


def find_turning_points(lam, pot: Potential = DEFAULT,
                        near: TurningPointSet = None) -> TurningPointSet:
    """The eight labeled simple turning points of V0(., lam) in the strip.

    Raises CoalescenceDetected near the double-point values and
    RootCountMismatch if the sweep does not find exactly eight roots.
    ``near`` (a set at a nearby lam) seeds Newton continuation instead of
    the full sweep; it is validated and silently ignored when unusable.
    Labels obtained through a chain of ``near`` hops follow that chain's
    path in the lam plane; a chain that encircled a double-point value
    would pick up the label monodromy instead of the fixed-path convention,
    so callers must not build loops around the lam_D values out of warm
    steps.
    """
    lam = complex(lam)
    for d in double_turning_lambdas(pot):
        if abs(lam - d.lam_D) <= 1e-6:
            raise CoalescenceDetected(f"lam={lam} is at double point {d.lam_D}")

    if near is not None and abs(lam - near.lam) <= 0.03:
        label_map = _warm_continue(lam, pot, near)
        if label_map is not None:
            pts = tuple(
                TurningPoint(complex(label_map[k]), k,
                             classify_zero(label_map[k], lam, pot))
                for k in LABELS
            )
            return TurningPointSet(lam, pts,
                                   f"warm continuation from {near.lam}")

    roots = _sweep_roots(lam, pot)
    if len(roots) != 8:
        raise RootCountMismatch(
            f"found {len(roots)} turning points at lam={lam}, expected 8"
        )
    sep = _cyl_dist(roots[:, None], roots[None, :]) + np.eye(8)
    if sep.min() < COALESCE_TOL:
        raise CoalescenceDetected(
            f"two turning points within {COALESCE_TOL} at lam={lam}"
        )

    on_axis = abs(lam.real) < 1e-12 and 0.01 <= lam.imag <= 0.55
    if on_axis:
        label_map = _label_imag_axis(lam, roots, pot)
        prov = "imaginary-axis geometric labeling"
    else:
        tracked = _track_labels(lam, pot)
        label_map = {}
        for name, xt in tracked.items():
            j = int(np.argmin(_cyl_dist(roots, xt)))
            if _cyl_dist(roots[j], xt) > 50 * DEDUP_TOL:
                raise RootCountMismatch(
                    f"continued label {name} does not match a swept root at "
                    f"lam={lam} (offset {abs(roots[j]-xt):.2e})"
                )
            label_map[name] = complex(roots[j])
        prov = f"continued from anchor {ANCHOR_LAM} along L-path"

    pts = tuple(
        TurningPoint(complex(label_map[k]), k, classify_zero(label_map[k], lam, pot))
        for k in LABELS
    )
    return TurningPointSet(lam, pts, prov)


def double_turning_lambdas(pot: Potential = DEFAULT) -> List[DoublePointDatum]:
    """The four parameter values with a double turning point (closed form).

    lam_D(sigma, tau) = i*sigma*sqrt(1/2 + r/2)*(1 - r),  r = (1 + i*tau*sqrt7)/4,
    with the double zero at tanh(2 x_D) = (1 + i*tau*sqrt7)/(4 i*sigma).
    The four values form the set {lam, -lam, lam*, -lam*}, indexed by quadrant.
    """
    if pot.amp_scale != 1.0 or pot.phase_scale != 1.0:
        raise NotImplementedError("double-point closed form is for the "
                                  "catalogued sech2x pair")
    out = []
    s7 = np.sqrt(7.0)
    quadrant = {(1, 1): 1, (1, -1): 2, (-1, 1): 3, (-1, -1): 4}
    for sigma in (1, -1):
        for tau in (1, -1):
            r = (1 + 1j * tau * s7) / 4
            lam = 1j * sigma * cmath.sqrt(0.5 + r / 2) * (1 - r)
            xD = cmath.atanh((1 + 1j * tau * s7) / (4j * sigma)) / 2
            out.append(DoublePointDatum(lam, xD, sigma, tau,
                                        quadrant[(sigma, tau)]))
    return sorted(out, key=lambda d: d.quadrant)
