"""Comparison-equation machinery for the turning-point error analysis.

Everything here concerns the model equation w'' = (9/4) t w: its recessive
standard solution, the rotated copies that decay in the three sectors of
the complex t-plane, and the weight/modulus/phase functions used to state
uniform remainder bounds.  The standard solution

    U(t) = (2t/pi)^(1/2) K_{1/3}(t^(3/2))

(principal values on ph t = 0, continued in phase elsewhere) is an entire
function of t: the branch factors of the two terms cancel, leaving the
scaled Airy form sqrt(6*pi) * (4/9)^(1/6) * Ai((9/4)^(1/3) t), which is
what we evaluate.  Tests cross-check this against the Bessel integral
representation on the right half-plane.

Sector conventions: S_j = { (2j-1)*pi/3 <= ph t <= (2j+1)*pi/3 } with the
phase taken in [-pi/3, 5*pi/3) so that the weight E is >= 1 everywhere.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import airy

from .errors import PhaseOutOfRange

__all__ = [
    "PHASE_WINDOW",
    "MbfEvaluation",
    "U_std",
    "U_deriv",
    "U_rot",
    "U_rot_deriv",
    "sector_of",
    "in_sector",
    "weight_E",
    "weight_E_pair",
    "lambda_jk",
    "c_jk",
    "big_theta",
    "modulus_bound",
    "hat_modulus_bound",
    "moduli",
]

_ARG_SCALE = (9.0 / 4.0) ** (1.0 / 3.0)
_AMP = math.sqrt(6.0 * math.pi) * (4.0 / 9.0) ** (1.0 / 6.0)
_ROT = tuple(cmath.exp(-2j * math.pi * j / 3.0) for j in range(3))

#: widest supported phase continuation from the positive axis
PHASE_WINDOW = 4.0 * math.pi / 3.0

_BOUNDARY_SLACK = 1e-12


def U_std(t: complex, phase: float | None = None) -> complex:
    """Standard recessive solution of w'' = (9/4) t w.

    `phase` may state the intended ph t when it exceeds the principal
    range; values beyond the supported window raise PhaseOutOfRange.
    Since the function is entire, the value depends only on the point,
    not on the phase determination.
    """
    if phase is not None and abs(phase) > PHASE_WINDOW + _BOUNDARY_SLACK:
        raise PhaseOutOfRange(
            f"ph t = {phase:.6f} lies outside the continuation window "
            f"|ph t| <= {PHASE_WINDOW:.6f}")
    ai = airy(_ARG_SCALE * complex(t))[0]
    return _AMP * complex(ai)


def U_deriv(t: complex) -> complex:
    """d/dt of the standard solution."""
    aip = airy(_ARG_SCALE * complex(t))[1]
    return _AMP * _ARG_SCALE * complex(aip)


def U_rot(j: int, t: complex) -> complex:
    """Rotated solution U(t e^{-2*pi*i*j/3}); recessive in sector j."""
    _check_index(j)
    return U_std(_ROT[j] * complex(t))


def U_rot_deriv(j: int, t: complex) -> complex:
    """d/dt of the rotated solution (chain rule included)."""
    _check_index(j)
    return _ROT[j] * U_deriv(_ROT[j] * complex(t))


def _check_index(j: int) -> None:
    if j not in (0, 1, 2):
        raise ValueError(f"sector index must be 0, 1 or 2, got {j!r}")


def _adjusted_phase(t: complex) -> float:
    """ph t in [-pi/3, 5*pi/3), the determination under which E >= 1."""
    ph = cmath.phase(complex(t))
    if ph < -math.pi / 3.0 - _BOUNDARY_SLACK:
        ph += 2.0 * math.pi
    return ph


def sector_of(t: complex) -> int:
    """Canonical sector index of t (boundaries resolve to the smaller j)."""
    ph = _adjusted_phase(t)
    if ph <= math.pi / 3.0 + _BOUNDARY_SLACK:
        return 0
    if ph <= math.pi + _BOUNDARY_SLACK:
        return 1
    return 2


def in_sector(j: int, t: complex) -> bool:
    """Whether t lies in the closed sector S_j."""
    _check_index(j)
    ph = cmath.phase(complex(t))
    centre = 2.0 * math.pi * j / 3.0
    off = (ph - centre + math.pi) % (2.0 * math.pi) - math.pi
    return abs(off) <= math.pi / 3.0 + _BOUNDARY_SLACK


def weight_E(t: complex) -> float:
    """Sector weight E(t) = |exp((-1)^j t^(3/2))| for t in S_j; E >= 1."""
    tc = complex(t)
    if tc == 0:
        return 1.0
    ph = _adjusted_phase(tc)
    j = sector_of(tc)
    half = abs(tc) ** 1.5 * math.cos(1.5 * ph)
    return math.exp(half if j != 1 else -half)


def weight_E_pair(j: int, k: int, t: complex) -> float:
    """Two-sector weight: 1/E(t) on S_j, E(t) on S_k (1 on the seam)."""
    _check_pair(j, k)
    if in_sector(j, t):
        return 1.0 / weight_E(t)
    if in_sector(k, t):
        return weight_E(t)
    raise PhaseOutOfRange(
        f"t = {complex(t):.6f} lies in neither sector {j} nor {k}")


def _check_pair(j: int, k: int) -> None:
    _check_index(j)
    _check_index(k)
    if j == k:
        raise ValueError("the two sector indices must differ")


def lambda_jk(j: int, k: int) -> float:
    """sin((k-j)*pi/3) / sin(pi/3); the +-1 weights of adjacent sectors."""
    return math.sin((k - j) * math.pi / 3.0) / math.sin(math.pi / 3.0)


def c_jk(j: int, k: int) -> float:
    """Constant of the modulus bound, built from the lambda weights."""
    _check_pair(j, k)
    up = abs(lambda_jk(j, k)) + abs(lambda_jk(j, (k + 1) % 3))
    dn = abs(lambda_jk(j, k)) + abs(lambda_jk(j, (k - 1) % 3))
    return max(math.hypot(1.0, up), math.hypot(1.0, dn))


def big_theta(s: complex) -> float:
    """Theta(s) = exp(5*pi / (72 |s|)) - 1."""
    return math.expm1(5.0 * math.pi / (72.0 * abs(complex(s))))


def modulus_bound(j: int, k: int, t: complex) -> float:
    """Envelope C_jk |t|^(-1/4) [1 + Theta(t^(3/2))] that majorizes M_jk."""
    a = abs(complex(t))
    return c_jk(j, k) * a ** -0.25 * (1.0 + big_theta(a ** 1.5))


def hat_modulus_bound(j: int, k: int, t: complex) -> float:
    """Envelope (3/2) C_jk |t|^(1/4) [1 + Theta(t^(3/2))] majorizing N-hat."""
    a = abs(complex(t))
    return 1.5 * c_jk(j, k) * a ** 0.25 * (1.0 + big_theta(a ** 1.5))


@dataclass(frozen=True)
class MbfEvaluation:
    """All weight/modulus/phase data of the pair (U_j, U_k) at one point.

    The modulus functions satisfy the reconstruction identities
    M^2 = |U_j|^2/E_jk^2 + E_jk^2 |U_k|^2 (same for N with derivatives),
    and the phase functions of the swapped pair are complementary:
    theta_jk + theta_kj = pi/2.
    """

    t: complex
    j: int
    k: int
    sector: int
    U_j: complex
    U_j_prime: complex
    U_k: complex
    U_k_prime: complex
    E: float
    E_jk: float
    M_jk: float
    N_jk: float
    N_hat_jk: float
    theta_jk: float
    omega_jk: float
    omega_hat_jk: float

    def as_tuple(self):
        """(M, N, N-hat, theta, omega, E_jk) in the documented order."""
        return (self.M_jk, self.N_jk, self.N_hat_jk,
                self.theta_jk, self.omega_jk, self.E_jk)


def moduli(j: int, k: int, t: complex) -> MbfEvaluation:
    """Evaluate the modulus and phase functions of the pair (j, k) at t.

    Requires t in the closed union S_j | S_k (PhaseOutOfRange otherwise)
    and t != 0 for the hat quantities.
    """
    _check_pair(j, k)
    tc = complex(t)
    e_pair = weight_E_pair(j, k, tc)    # also validates the sector domain

    uj, ujp = U_rot(j, tc), U_rot_deriv(j, tc)
    uk, ukp = U_rot(k, tc), U_rot_deriv(k, tc)

    m = math.hypot(abs(uj) / e_pair, e_pair * abs(uk))
    n = math.hypot(abs(ujp) / e_pair, e_pair * abs(ukp))
    theta = math.atan2(e_pair ** 2 * abs(uk), abs(uj))
    omega = math.atan2(e_pair ** 2 * abs(ukp), abs(ujp))

    if tc != 0:
        dj = abs(uj / (4.0 * tc) + ujp)
        dk = abs(uk / (4.0 * tc) + ukp)
        n_hat = math.hypot(dj / e_pair, e_pair * dk)
        omega_hat = math.atan2(e_pair ** 2 * dk, dj)
    else:
        n_hat = math.inf
        omega_hat = math.nan

    return MbfEvaluation(
        t=tc, j=j, k=k, sector=sector_of(tc),
        U_j=uj, U_j_prime=ujp, U_k=uk, U_k_prime=ukp,
        E=weight_E(tc), E_jk=e_pair,
        M_jk=m, N_jk=n, N_hat_jk=n_hat,
        theta_jk=theta, omega_jk=omega, omega_hat_jk=omega_hat)


def _pair_values(j: int, k: int, ts: np.ndarray):
    """Vectorized |U_j|, |U_k| and E_jk over an array of sector points.

    Used by the remainder-bound suprema; points outside S_j | S_k yield
    NaN weights so callers can mask them out.
    """
    ts = np.asarray(ts, dtype=complex)
    zj = airy(_ARG_SCALE * _ROT[j] * ts)[0] * _AMP
    zk = airy(_ARG_SCALE * _ROT[k] * ts)[0] * _AMP

    ph = np.angle(ts)
    ph = np.where(ph < -math.pi / 3.0 - _BOUNDARY_SLACK,
                  ph + 2.0 * math.pi, ph)
    sector = np.where(ph <= math.pi / 3.0 + _BOUNDARY_SLACK, 0,
                      np.where(ph <= math.pi + _BOUNDARY_SLACK, 1, 2))
    half = np.abs(ts) ** 1.5 * np.cos(1.5 * ph)
    e = np.exp(np.where(sector == 1, -half, half))

    in_j = _in_sector_arr(j, ts)
    in_k = _in_sector_arr(k, ts)
    e_pair = np.where(in_j, 1.0 / e, np.where(in_k, e, np.nan))
    return np.abs(zj), np.abs(zk), e_pair


def _in_sector_arr(j: int, ts: np.ndarray) -> np.ndarray:
    ph = np.angle(np.asarray(ts, dtype=complex))
    centre = 2.0 * math.pi * j / 3.0
    off = (ph - centre + math.pi) % (2.0 * math.pi) - math.pi
    return np.abs(off) <= math.pi / 3.0 + _BOUNDARY_SLACK
