"""Spectral arcs Re I_jk = 0 in the lambda plane, their junction, and the
limiting eigenvalue density.

Arcs are continued by a predictor-corrector walker: the level-set tangent of
Re I_jk comes from the holomorphic derivative I'(lam) (central differences,
h = 1e-6), the corrector is a transverse Newton step.  The (1,2) arc is the
segment of the imaginary axis below the junction; (1,6) and (2,6) leave the
junction with +/- slopes and die at the double points, where the defining
turning-point pair coalesces.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np
from scipy.optimize import brentq

from .action import (_PAIRS, _tps_cached, contour_integral, gap_waypoint,
                     I_jk)
from .errors import LostArc, NoRootInBracket
from .geometry import double_turning_lambdas
from .potential import DEFAULT, Potential

STEP = 5e-3
_DERIV_H = 1e-6
_NODE_TOL = 1e-8
_ORIGIN_RADIUS = 1e-3
_DOUBLE_POINT_RADIUS = 1e-4


@dataclass(frozen=True)
class SpectralArc:
    pair: Tuple[int, int]
    lams: np.ndarray          # polyline nodes
    actions: np.ndarray       # I_pair at the nodes
    arclength: np.ndarray     # cumulative |d lam|
    start_kind: str           # "seed" | "origin" | "junction" | "double-point"
    end_kind: str
    end_value: complex        # the geometric endpoint the trace stopped at

    def __len__(self):
        return len(self.lams)


@dataclass(frozen=True)
class BifurcationPoint:
    lam: complex
    mu: float
    pairs: Tuple[Tuple[int, int], ...]
    actions: Dict[Tuple[int, int], complex]


def _I_deriv(lam, pair, pot):
    h = _DERIV_H
    return (I_jk(lam + h, pair, pot) - I_jk(lam - h, pair, pot)) / (2 * h)


def _newton_onto_arc(lam, pair, pot, tol=_NODE_TOL, iters=8):
    """Project lam onto Re I_pair = 0 along the gradient direction."""
    for _ in range(iters):
        F = I_jk(lam, pair, pot).real
        if abs(F) <= tol:
            return lam
        dI = _I_deriv(lam, pair, pot)
        if abs(dI) < 1e-14:
            break
        lam = lam - F * np.conj(dI) / abs(dI) ** 2
    F = I_jk(lam, pair, pot).real
    if abs(F) <= tol:
        return lam
    return None


def arc_seed(pair, near, pot: Potential = DEFAULT) -> complex:
    """Project a nearby lambda onto Re I_pair = 0 (Newton along the
    gradient); a convenient way to produce a valid trace_arc seed."""
    lam = _newton_onto_arc(complex(near), tuple(pair), pot, tol=1e-10)
    if lam is None:
        raise LostArc(f"no arc of Re I_{pair[0]}{pair[1]} near {near}")
    return lam


@lru_cache(maxsize=8)
def find_bifurcation(pot: Potential = DEFAULT) -> BifurcationPoint:
    """The junction iota mu of the three arcs: the root of Re I_16(i mu) = 0
    on the imaginary axis (where Re I_12 vanishes identically by mirror
    symmetry), bracketed in mu in (0.2, 0.4)."""
    def g(mu):
        return I_jk(1j * mu, (1, 6), pot).real

    a, b = 0.2, 0.4
    ga, gb = g(a), g(b)
    if ga * gb > 0:
        raise NoRootInBracket(
            f"Re I_16(i mu) has no sign change on ({a}, {b}): "
            f"g({a})={ga:.3e}, g({b})={gb:.3e}")
    mu = brentq(g, a, b, xtol=1e-12, rtol=8.9e-16)
    lam = 1j * mu
    acts = {p: I_jk(lam, p, pot) for p in _PAIRS}
    if abs(acts[(2, 6)].real) > 1e-7:
        raise LostArc(
            f"Re I_26 = {acts[(2, 6)].real:.2e} at the junction; "
            "expected < 1e-7 by mirror symmetry")
    return BifurcationPoint(lam, mu, _PAIRS, acts)


def trace_arc(pair, seed, direction: int = 1,
              pot: Potential = DEFAULT, step: float = STEP) -> SpectralArc:
    """Continue the arc Re I_pair = 0 from a seed with |Re I| <= 1e-6.

    direction picks which of the two level-set tangents to follow.  The walk
    stops at the origin (|lam| < 1e-3), at the arc junction, or within 1e-4
    of the double point where the pair coalesces; overstepping past the
    junction or a double point is prevented by shrinking the step on
    approach.
    """
    pair = tuple(pair)
    if pair not in _PAIRS:
        raise ValueError(f"pair must be one of {_PAIRS}, got {pair}")
    lam = complex(seed)
    if abs(I_jk(lam, pair, pot).real) > 1e-6:
        raise LostArc(f"seed {lam} is not on Re I_{pair[0]}{pair[1]} = 0")
    lam = _newton_onto_arc(lam, pair, pot)
    if lam is None:
        raise LostArc(f"cannot polish seed {seed} onto the arc")

    junction = find_bifurcation(pot).lam
    doubles = [d.lam_D for d in double_turning_lambdas(pot)]

    nodes = [lam]
    values = [I_jk(lam, pair, pot)]
    end_kind, end_value = "seed", lam
    h = step
    for _ in range(100_000):
        lam = nodes[-1]
        if abs(lam) < _ORIGIN_RADIUS:
            end_kind, end_value = "origin", 0.0 + 0.0j
            break
        near_dbl = min(doubles, key=lambda d: abs(lam - d))
        if abs(lam - near_dbl) < _DOUBLE_POINT_RADIUS:
            end_kind, end_value = "double-point", near_dbl
            break
        if len(nodes) > 1 and abs(lam - junction) < 0.75 * step:
            vj = I_jk(junction, pair, pot)
            # drop any node the walker placed past the junction (Im I is the
            # arc parameter, so "past" is an Im comparison)
            s = 1.0 if values[-1].imag >= values[0].imag else -1.0
            while len(nodes) > 1 and (vj.imag - values[-1].imag) * s <= 0:
                nodes.pop()
                values.pop()
            nodes.append(junction)
            values.append(vj)
            end_kind, end_value = "junction", junction
            break

        dI = _I_deriv(lam, pair, pot)
        if abs(dI) < 1e-12:
            raise LostArc(f"vanishing gradient of Re I at {lam}")
        tangent = direction * 1j * np.conj(dI) / abs(dI)
        # do not jump over a geometric stopping point
        h_eff = min(h, 0.5 * abs(lam - near_dbl) + 0.25 * _DOUBLE_POINT_RADIUS,
                    max(0.6 * abs(lam), 0.5 * _ORIGIN_RADIUS))
        trial = _newton_onto_arc(lam + h_eff * tangent, pair, pot)
        while trial is None and h_eff > 1e-6:
            h_eff *= 0.5
            trial = _newton_onto_arc(lam + h_eff * tangent, pair, pot)
        if trial is None:
            raise LostArc(f"corrector failed near {lam} at step {h_eff:.1e}")
        if abs(trial - lam) < 1e-12:
            raise LostArc(f"arc walker stalled at {lam}")
        nodes.append(trial)
        values.append(I_jk(trial, pair, pot))
    else:
        raise LostArc("arc walker did not terminate")

    lams = np.asarray(nodes, dtype=complex)
    seg = np.abs(np.diff(lams))
    return SpectralArc(pair, lams, np.asarray(values, dtype=complex),
                       np.concatenate([[0.0], np.cumsum(seg)]),
                       "seed", end_kind, end_value)


def _stitch(first: SpectralArc, second: SpectralArc) -> SpectralArc:
    """Join two traces that share their seed node into a single arc running
    from first's terminal to second's terminal."""
    if first.pair != second.pair:
        raise ValueError("cannot stitch arcs of different pairs")
    if abs(first.lams[0] - second.lams[0]) > 1e-9:
        raise ValueError("traces do not share their seed node")
    lams = np.concatenate([first.lams[::-1], second.lams[1:]])
    acts = np.concatenate([first.actions[::-1], second.actions[1:]])
    seg = np.abs(np.diff(lams))
    return SpectralArc(first.pair, lams, acts,
                       np.concatenate([[0.0], np.cumsum(seg)]),
                       first.end_kind, second.end_kind, second.end_value)


def spectral_arcs(pot: Potential = DEFAULT,
                  step: float = STEP) -> Dict[Tuple[int, int], SpectralArc]:
    """All three clipped arcs: (1,2) from the origin to the junction and the
    two wings from the junction to their double points, each as a single
    polyline (two directional traces stitched at the seed)."""
    B = find_bifurcation(pot)
    out: Dict[Tuple[int, int], SpectralArc] = {}
    seeds = {
        (1, 2): arc_seed((1, 2), 1j * (B.mu / 2), pot),
        (2, 6): arc_seed((2, 6), B.lam + 0.012 * np.exp(0.55j), pot),
        (1, 6): arc_seed((1, 6), B.lam + 0.012 * np.exp(1j * (np.pi - 0.55)),
                         pot),
    }
    ends = {(1, 2): ("origin", "junction"),
            (2, 6): ("junction", "double-point"),
            (1, 6): ("junction", "double-point")}
    for pair, seed in seeds.items():
        halves = {}
        for direction in (1, -1):
            t = trace_arc(pair, seed, direction, pot, step)
            halves[t.end_kind] = t
        want = ends[pair]
        if set(halves) != set(want):
            raise LostArc(
                f"{pair} traces ended at {sorted(halves)}, expected {want}")
        out[pair] = _stitch(halves[want[0]], halves[want[1]])
    return out


def density_rho_analytic(lam, pair, pot: Potential = DEFAULT) -> complex:
    """(lam / pi) int dx / (i sqrt(-V0)) between the pair's turning points,
    branch and route identical to the action I_pair (the (1,2) contour
    crosses inside the (x6, x7) gap; wings take the direct segment).

    On the pair's own arc the value is real; elsewhere it is the analytic
    continuation, with rho_12 = rho_16 + rho_26 at a common point.
    """
    pair = tuple(pair)
    if pair not in _PAIRS:
        raise ValueError(f"pair must be one of {_PAIRS}, got {pair}")
    lam = complex(lam)
    tps = _tps_cached(lam, pot)
    a = tps[f"x{pair[0]}"].x
    b = tps[f"x{pair[1]}"].x
    if a.real > b.real:
        # orient every pair left to right; this is the orientation on which
        # rho_12 = rho_16 + rho_26 holds with all three seeded independently
        a, b = b, a
    via = (gap_waypoint(lam, pot),) if pair == (1, 2) else ()
    q = contour_integral(a, b, lam, kernel=lambda v: 1.0 / v,
                         via=via, pot=pot, tps=tps)
    return lam / np.pi * q / 1j


def density_rho(lam, pair, pot: Potential = DEFAULT) -> float:
    """Limiting eigenvalue density at a point interior to the pair's own
    arc: the analytic value with its imaginary part checked against 1e-6
    and dropped."""
    rho = density_rho_analytic(lam, pair, pot)
    if abs(rho.imag) > 1e-6:
        raise LostArc(
            f"density at {lam} has imaginary part {rho.imag:.2e}; "
            "the point is not interior to the ({},{}) arc".format(*pair))
    return float(rho.real)
