"""WKB eigenvalue predictions: generic-arc quantization, the three-action
condition near the arc junction, the near-zero variant, and norming signs.

The generic rule is m e^{2z/eps} = 1 with leading order m = -1, i.e.
Im z / eps = (n + 1/2) pi together with Re z = 0 -- the latter holds on the
arc, so roots are found by monotone inversion of Im I along the traced arc
polyline and polished by a complex Newton step on the full action.

Near the junction neither exponential dominates and the condition becomes

    -e^{2 z(g,lam,a)/eps} - e^{2 z(g,lam,b)/eps} = 1

with (a, b, g) = (x1, x2, x6).  On the imaginary axis below the junction
the two actions are complex conjugates and the condition reduces to the
real equation 2 e^{2c/eps} cos(2d/eps) = -1, c + i d = I_16; off the axis
the roots sit near the wing arcs and are caught by Newton from reduced
Bohr-Sommerfeld seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .action import I_jk, xi_c, _tps_cached
from .arcs import SpectralArc, arc_seed, find_bifurcation
from .errors import (NewtonDivergence, NonMonotoneAction, OracleUnavailable)
from .geometry import GClass
from .potential import DEFAULT, Potential

_RESIDUAL_TOL = 1e-10


class Regime(Enum):
    GenericArc = "generic-arc"
    Bifurcation = "bifurcation"
    NearZero = "near-zero"


@dataclass(frozen=True)
class EigenvalueRecord:
    lam: complex
    n: int
    regime: Regime
    eps: float
    pair: Optional[Tuple[int, int]] = None
    norming_sign: Optional[int] = None
    sign_verified: bool = False
    oracle_match: Optional[Tuple[complex, float]] = None


@dataclass(frozen=True)
class DeltaIndex:
    classes: Tuple[GClass, GClass]
    delta: int

    def __post_init__(self):
        same = self.classes[0] == self.classes[1]
        if self.delta != (-1 if same else 1):
            raise ValueError("delta inconsistent with endpoint classes")


def delta_index(a: GClass, b: GClass) -> DeltaIndex:
    """delta = -1 when both turning points kill the same symbol factor,
    +1 otherwise; the leading-order multiplier in the quantization rule is
    m = delta."""
    return DeltaIndex((a, b), -1 if a == b else 1)


def quantization_residual(lam, pair, eps, pot: Potential = DEFAULT) -> float:
    """|m e^{2 I_pair / eps} - 1| with m = -1: zero exactly at a root."""
    return abs(-np.exp(2 * I_jk(lam, pair, pot) / eps) - 1.0)


def _newton_root(lam, pair, target, eps, pot, tol=None, iters=12):
    """Solve I_pair(lam) = target by complex Newton (holomorphic I)."""
    tol = tol if tol is not None else 2e-11 * eps
    h = 1e-6
    for _ in range(iters):
        g = I_jk(lam, pair, pot) - target
        if abs(g) <= tol:
            return lam
        dI = (I_jk(lam + h, pair, pot) - I_jk(lam - h, pair, pot)) / (2 * h)
        if abs(dI) < 1e-14:
            break
        lam = lam - g / dI
    g = I_jk(lam, pair, pot) - target
    if abs(g) <= tol:
        return lam
    raise NewtonDivergence(
        f"quantization polish stalled at {lam}, |defect| = {abs(g):.2e}")


def bs_eigenvalues(arc: SpectralArc, eps: float,
                   exclusion: Optional[float] = None,
                   pot: Potential = DEFAULT) -> List[EigenvalueRecord]:
    """Bohr-Sommerfeld roots Im I_pair / eps = (n + 1/2) pi along a traced
    arc, the junction excluded within `exclusion` (default 3 eps log(1/eps)).
    """
    if not 0 < eps <= 0.5:
        raise ValueError(f"eps = {eps} outside (0, 0.5]")
    if exclusion is None:
        exclusion = 3.0 * eps * np.log(1.0 / eps)
    im = arc.actions.imag
    d = np.diff(im)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise NonMonotoneAction(
            f"Im I_{arc.pair[0]}{arc.pair[1]} is not monotone on the arc")

    junction = find_bifurcation(pot).lam
    keep = np.abs(arc.lams - junction) >= exclusion
    out: List[EigenvalueRecord] = []
    # exclusion can split the polyline: invert on each kept run separately
    runs = np.split(np.arange(len(keep)), np.nonzero(np.diff(keep))[0] + 1)
    for run in runs:
        if len(run) < 2 or not keep[run[0]]:
            continue
        seg = im[run]
        lo, hi = min(seg[0], seg[-1]), max(seg[0], seg[-1])
        n_lo = int(np.ceil(lo / (np.pi * eps) - 0.5))
        n_hi = int(np.floor(hi / (np.pi * eps) - 0.5))
        for n in range(n_lo, n_hi + 1):
            level = (n + 0.5) * np.pi * eps
            j = np.searchsorted(seg if seg[0] < seg[-1] else -seg,
                                level if seg[0] < seg[-1] else -level)
            j = min(max(j, 1), len(seg) - 1)
            a, b = run[j - 1], run[j]
            t = (level - im[a]) / (im[b] - im[a])
            seed = arc.lams[a] + t * (arc.lams[b] - arc.lams[a])
            lam = _newton_root(seed, arc.pair, 1j * level, eps, pot)
            if abs(lam - junction) < exclusion:
                continue
            out.append(EigenvalueRecord(lam, n, Regime.GenericArc, eps,
                                        pair=arc.pair))
    out.sort(key=lambda r: r.n)
    return out


def _wing_points(pair, eps, radius, pot):
    """March along a wing arc away from the junction, by Newton projection
    with tangent extrapolation; returns points at ~eps/3 spacing."""
    B = find_bifurcation(pot)
    sign = 1.0 if pair == (2, 6) else -1.0
    step = max(eps / 3.0, 0.01)
    # the wings leave the junction around 60 degrees from the axis
    lam = arc_seed(pair, B.lam + step * np.exp(1j * (np.pi / 2 - sign * 1.0)),
                   pot)
    pts = [lam]
    while abs(pts[-1] - B.lam) < radius:
        guess = pts[-1] + step * ((pts[-1] - pts[-2]) / abs(pts[-1] - pts[-2])
                                  if len(pts) > 1 else
                                  (pts[-1] - B.lam) / abs(pts[-1] - B.lam))
        try:
            nxt = arc_seed(pair, guess, pot)
        except Exception:
            break
        if abs(nxt - pts[-1]) < 0.1 * step:
            break
        pts.append(nxt)
        if len(pts) > 400:
            break
    return pts


def _qc3_value(lam, eps, pot):
    E1 = np.exp(2 * I_jk(lam, (1, 6), pot) / eps)
    E2 = np.exp(2 * I_jk(lam, (2, 6), pot) / eps)
    return -E1 - E2 - 1.0


def _qc3_newton(lam, eps, pot, iters=16):
    h = 1e-6
    for _ in range(iters):
        F = _qc3_value(lam, eps, pot)
        if abs(F) <= _RESIDUAL_TOL:
            return lam
        dF = (_qc3_value(lam + h, eps, pot)
              - _qc3_value(lam - h, eps, pot)) / (2 * h)
        if abs(dF) < 1e-14:
            break
        step = F / dF
        if abs(step) > 0.1:
            step *= 0.1 / abs(step)
        lam = lam - step
    raise NewtonDivergence(f"three-action condition stalled near {lam}")


def bifurcation_eigenvalues(eps: float, window: Optional[float] = None,
                            cprime: float = 1.0,
                            pot: Potential = DEFAULT
                            ) -> List[EigenvalueRecord]:
    """Roots of the three-action condition in a disk around the junction
    (default radius 5 eps, never below the validity radius
    cprime * eps * log(1/eps)).

    Seeds: sign changes of the (real) on-axis condition below the junction,
    plus reduced Bohr-Sommerfeld phases marched along both wings; every
    seed is polished by a complex Newton on the full condition and the
    results deduplicated.
    """
    if window is None:
        window = 5.0 * eps
    window = max(window, cprime * eps * np.log(1.0 / eps))
    B = find_bifurcation(pot)

    roots: List[complex] = []

    # --- on-axis: F(i mu) is real below the junction
    mu_lo = max(5e-3, B.mu - window)
    mus = np.linspace(mu_lo, B.mu - 1e-4, max(8, int(np.ceil(
        (B.mu - mu_lo) / (eps / 6.0)))))
    vals = np.array([_qc3_value(1j * m, eps, pot).real for m in mus])
    for k in np.nonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))[0]:
        mu = brentq(lambda m: _qc3_value(1j * m, eps, pot).real,
                    mus[k], mus[k + 1], xtol=1e-13)
        roots.append(1j * mu)

    # --- wings: reduced condition Im I_pair / eps = (n + 1/2) pi
    for pair in ((2, 6), (1, 6)):
        pts = _wing_points(pair, eps, window, pot)
        if len(pts) < 2:
            continue
        ph = np.array([I_jk(p, pair, pot).imag / eps for p in pts])
        for k in range(len(pts) - 1):
            lo, hi = sorted((ph[k], ph[k + 1]))
            n_lo = int(np.ceil(lo / np.pi - 0.5))
            n_hi = int(np.floor(hi / np.pi - 0.5))
            for n in range(n_lo, n_hi + 1):
                t = ((n + 0.5) * np.pi - ph[k]) / (ph[k + 1] - ph[k])
                seed = pts[k] + t * (pts[k + 1] - pts[k])
                try:
                    roots.append(_qc3_newton(seed, eps, pot))
                except NewtonDivergence:
                    continue

    # dedupe and clip to the window
    kept: List[complex] = []
    for r in sorted(roots, key=lambda z: (round(z.imag, 9), round(z.real, 9))):
        if abs(r - B.lam) > window:
            continue
        if any(abs(r - q) < 1e-8 for q in kept):
            continue
        kept.append(r)

    recs = [EigenvalueRecord(r, 0, Regime.Bifurcation, eps)
            for r in kept]
    # index by the symmetrized phase, which is monotone through the junction
    recs.sort(key=lambda rec: (I_jk(rec.lam, (1, 6), pot).imag
                               + I_jk(rec.lam, (2, 6), pot).imag))
    return [replace(rec, n=i) for i, rec in enumerate(recs)]


def near_zero_eigenvalues(eps: float,
                          region: Tuple[float, float] = (1e-3, 0.15),
                          pot: Potential = DEFAULT) -> List[EigenvalueRecord]:
    """Quantization on the axis segment near lambda = 0: the condition
    -exp(2 xi_{x1}(x2)/eps) = 1, the same arithmetic as the generic rule but
    valid arbitrarily close to zero (the actions stay finite there)."""
    mu_lo, mu_hi = region
    if not 0 < mu_lo < mu_hi:
        raise ValueError(f"bad region {region}")
    mu_hi = min(mu_hi, find_bifurcation(pot).mu - 1e-3)

    def phase(mu):
        lam = 1j * mu
        tps = _tps_cached(lam, pot)
        return xi_c(tps["x2"].x, lam, tps["x1"], pot).imag

    n_grid = max(12, int(np.ceil((mu_hi - mu_lo) / (eps / 8.0))))
    mus = np.linspace(mu_lo, mu_hi, n_grid)
    ph = np.array([phase(m) for m in mus])
    out: List[EigenvalueRecord] = []
    for k in range(len(mus) - 1):
        lo, hi = sorted((ph[k], ph[k + 1]))
        n_lo = int(np.ceil(lo / (np.pi * eps) - 0.5))
        n_hi = int(np.floor(hi / (np.pi * eps) - 0.5))
        for n in range(n_lo, n_hi + 1):
            level = (n + 0.5) * np.pi * eps
            mu = brentq(lambda m: phase(m) - level, mus[k], mus[k + 1],
                        xtol=1e-13)
            out.append(EigenvalueRecord(1j * mu, n, Regime.NearZero, eps,
                                        pair=(1, 2)))
    out.sort(key=lambda r: r.n)
    return out


def norming_signs(records: Sequence[EigenvalueRecord],
                  oracle: Optional[Callable[[complex], int]] = None
                  ) -> List[EigenvalueRecord]:
    """Alternating signs (-1)^n with the global sign pinned by the oracle at
    the record nearest the arc midpoint; without an oracle the global sign
    defaults to + at even n and the records stay flagged unverified."""
    if not records:
        return []
    recs = sorted(records, key=lambda r: r.n)
    global_sign, verified = 1, False
    if oracle is not None:
        mid = recs[len(recs) // 2]
        try:
            s = oracle(mid.lam)
            if s not in (-1, 1):
                raise OracleUnavailable(f"oracle returned {s!r}")
            global_sign = s * (-1) ** (mid.n % 2)
            verified = True
        except OracleUnavailable:
            pass
    return [replace(r, norming_sign=global_sign * (-1) ** (r.n % 2),
                    sign_verified=verified)
            for r in recs]
