"""Closed-form evaluation of the potential pair and derived scalar fields.

The default (and currently only catalogued) potential is the symmetric pair

    A(x) = S(x) = sech(2x),

analytic in the strip -pi/2 < Im x <= pi/2 except for poles at x = +-i*pi/4,
and i*pi-periodic in x.  All derivatives are hand-differentiated sech/tanh
identities (no automatic differentiation): this module sits in every hot loop
of the package.

The central derived field is the leading-order "potential"

    V0(x, lam) = -(lam + S'(x)/2)^2 - A(x)^2 = gminus * gplus,

whose zeros in x are the turning points, with the factorization

    gminus = lam + S'/2 - i*A,      gplus = -(lam + S'/2 + i*A).

Evaluation closer than ``POLE_GUARD`` to a pole raises PoleProximity; nothing
downstream ever needs to approach a pole closer than that.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from .errors import DenominatorVanishes, PoleProximity

POLE_GUARD = 1e-3
STRIP_HALF_WIDTH = np.pi / 2


def _sech(x):
    """Numerically stable sech for complex x (folds to Re x >= 0)."""
    x = np.asarray(x, dtype=complex)
    xa = np.where(x.real >= 0, x, -x)
    e = np.exp(-xa)
    return 2 * e / (1 + e * e)


def _tanh(x):
    x = np.asarray(x, dtype=complex)
    s = np.where(x.real >= 0, 1.0, -1.0)
    e = np.exp(-s * 2 * x)
    return s * (1 - e) / (1 + e)


class Field(Enum):
    A = "A"
    S = "S"
    Sprime = "Sprime"
    V0 = "V0"
    gPlus = "gPlus"
    gMinus = "gMinus"
    corrG = "corrG"
    fTilde = "fTilde"


@dataclass(frozen=True)
class ScalarField:
    """One sampled value of a derived scalar field."""

    x: complex
    lam: complex
    value: complex
    which: Field


@dataclass(frozen=True)
class Rectangle:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def corners(self) -> Tuple[complex, complex, complex, complex]:
        return (
            complex(self.re_min, self.im_min),
            complex(self.re_max, self.im_min),
            complex(self.re_max, self.im_max),
            complex(self.re_min, self.im_max),
        )


@dataclass(frozen=True)
class Potential:
    """The analytic pair (A, S) and its closed-form derivatives.

    Parameters
    ----------
    family : str
        Catalog id.  Only ``"sech2x"`` is catalogued; the amplitude/phase
        scale factors exist as the documented extension point (they keep the
        sech profile but rescale A and S independently, which is enough to
        exercise the numerical-range contract).
    amp_scale, phase_scale : float
        A(x) = amp_scale * sech(2x), S(x) = phase_scale * sech(2x).
    """

    family: str = "sech2x"
    amp_scale: float = 1.0
    phase_scale: float = 1.0
    strip_half_width: float = STRIP_HALF_WIDTH
    poles: tuple = (0.25j * np.pi, -0.25j * np.pi)
    pole_guard: float = POLE_GUARD

    # -- guard --------------------------------------------------------------

    def pole_distance(self, x) -> np.ndarray:
        """Distance to the nearest pole, accounting for the i*pi period."""
        x = np.asarray(x, dtype=complex)
        im = np.mod(x.imag + STRIP_HALF_WIDTH, np.pi) - STRIP_HALF_WIDTH
        folded = x.real + 1j * im
        d = np.full(folded.shape, np.inf)
        for p in self.poles:
            d = np.minimum(d, np.abs(folded - p))
        return d

    def check_guard(self, x) -> None:
        d = self.pole_distance(x)
        if np.any(d < self.pole_guard):
            bad = np.asarray(x, dtype=complex).ravel()[np.argmin(np.asarray(d).ravel())]
            raise PoleProximity(
                f"x={bad} is within {self.pole_guard} of a potential pole"
            )

    # -- the pair and its derivatives ---------------------------------------

    def A(self, x):
        return self.amp_scale * _sech(2 * x)

    def S(self, x):
        return self.phase_scale * _sech(2 * x)

    def Sprime(self, x):
        return -2 * self.phase_scale * _sech(2 * x) * _tanh(2 * x)

    def Aprime(self, x):
        return -2 * self.amp_scale * _sech(2 * x) * _tanh(2 * x)

    def App(self, x):
        a = _sech(2 * x)
        return self.amp_scale * (4 * a - 8 * a ** 3)

    def Appp(self, x):
        a, t = _sech(2 * x), _tanh(2 * x)
        return self.amp_scale * (-8 * a * t + 48 * a ** 3 * t)

    def Spp(self, x):
        a = _sech(2 * x)
        return self.phase_scale * (4 * a - 8 * a ** 3)

    def Sppp(self, x):
        a, t = _sech(2 * x), _tanh(2 * x)
        return self.phase_scale * (-8 * a * t + 48 * a ** 3 * t)

    # -- derived fields -----------------------------------------------------

    def V0(self, x, lam):
        m = lam + self.Sprime(x) / 2
        a = self.A(x)
        return -(m * m) - a * a

    def dV0_dx(self, x, lam):
        m = lam + self.Sprime(x) / 2
        return -(m * self.Spp(x) + 2 * self.A(x) * self.Aprime(x))

    def g_minus(self, x, lam):
        return lam + self.Sprime(x) / 2 - 1j * self.A(x)

    def g_plus(self, x, lam):
        return -(lam + self.Sprime(x) / 2 + 1j * self.A(x))

    def f(self, x, lam):
        """f = A^2 + (lam + S'/2)^2 = -V0; positive on the real axis."""
        return -self.V0(x, lam)

    def correction_g(self, x, lam):
        """Scalar-reduction correction term.

        With D = A - i*(lam + S'/2) (so that D = i*gplus, vanishing exactly at
        the gPlus-class turning points), the correction is

            g = (3/4) (D'/D)^2 - (1/2) D''/D,

        i.e. D^{1/2} (D^{-1/2})''.  D' = A' - i*A''/2 and D'' = A'' - i*A'''/2
        for the symmetric pair (S = A up to the catalogue scales).
        """
        D = self.A(x) - 1j * (lam + self.Sprime(x) / 2)
        scale = 1.0 + abs(lam)
        if np.any(np.abs(D) <= 1e-10 * scale):
            raise DenominatorVanishes(
                f"A - i(lam + S'/2) vanishes near x={x}: turning point of the "
                "gPlus class"
            )
        Dp = self.Aprime(x) - 1j * self.Spp(x) / 2
        Dpp = self.App(x) - 1j * self.Sppp(x) / 2
        return 0.75 * (Dp / D) ** 2 - 0.5 * Dpp / D

    def numerical_range(self) -> Rectangle:
        """Closed-form numerical range of the symbol.

        Re-extent is -1/2 * [inf S', sup S']; Im-extent is [-sup|A|, sup|A|].
        For sech(2x): sup of 2*sech(u)*tanh(u) is 1 (at sinh u = 1), so S' on
        the real line has range [-s, s] and the rectangle is
        [-s/2, s/2] x i[-a, a].
        """
        s = abs(self.phase_scale)
        a = abs(self.amp_scale)
        return Rectangle(-s / 2, s / 2, -a, a)


DEFAULT = Potential()


# -- module-level operations on the default potential -----------------------

def eval_A(x, pot: Potential = DEFAULT):
    """sech(2x) with the pole guard enforced."""
    pot.check_guard(x)
    v = pot.A(x)
    return complex(v) if np.ndim(x) == 0 else v


def eval_V0(x, lam, pot: Potential = DEFAULT):
    """-(lam + S'/2)^2 - A^2 ( = gminus * gplus )."""
    pot.check_guard(x)
    v = pot.V0(x, lam)
    return complex(v) if np.ndim(x) == 0 else v


def eval_correction_g(x, lam, pot: Potential = DEFAULT):
    pot.check_guard(x)
    v = pot.correction_g(x, lam)
    return complex(v) if np.ndim(x) == 0 else v


def numerical_range(pot: Potential = DEFAULT) -> Rectangle:
    return pot.numerical_range()


def sample(which: Field, x, lam=0.0, pot: Potential = DEFAULT) -> ScalarField:
    """Evaluate one derived field and wrap it in a ScalarField record."""
    pot.check_guard(x)
    fns = {
        Field.A: lambda: pot.A(x),
        Field.S: lambda: pot.S(x),
        Field.Sprime: lambda: pot.Sprime(x),
        Field.V0: lambda: pot.V0(x, lam),
        Field.gPlus: lambda: pot.g_plus(x, lam),
        Field.gMinus: lambda: pot.g_minus(x, lam),
        Field.corrG: lambda: pot.correction_g(x, lam),
        Field.fTilde: lambda: pot.f(x, lam),
    }
    return ScalarField(complex(x), complex(lam), complex(fns[which]()), which)
