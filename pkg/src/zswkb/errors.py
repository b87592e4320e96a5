"""Exception taxonomy for the package.

Every numerical failure mode that callers are expected to handle has its own
type; all inherit from ZsWkbError so a bare ``except ZsWkbError`` catches any
domain failure without swallowing programming errors.
"""


class ZsWkbError(Exception):
    """Base class for all domain errors raised by this package."""


# --- potential ---

class PoleProximity(ZsWkbError):
    """Evaluation point is within the guard radius of a potential pole."""


class DenominatorVanishes(ZsWkbError):
    """The scalar-reduction denominator A - i(lam + S'/2) vanishes at/near x.

    This signals a turning point where that factor is zero (the gPlus-class
    points in the classification used by ``geometry``).
    """


# --- geometry ---

class CoalescenceDetected(ZsWkbError):
    """Two turning points are closer than the coalescence threshold
    (lambda is near a double-turning-point value)."""


class RootCountMismatch(ZsWkbError):
    """The strip sweep found a number of turning points different from 8."""


class AmbiguousClass(ZsWkbError):
    """Both |g-| and |g+| are small at the point; classification refused."""


# --- stokes ---

class StallDetected(ZsWkbError):
    """Stokes tracer step collapsed without reaching a termination."""


class BranchDiscontinuity(ZsWkbError):
    """Continuation of sqrt(-V0) along a path failed (jump too large after
    maximal refinement)."""


# --- action ---

class PathObstructed(ZsWkbError):
    """No route between the endpoints stays clear of poles / turning points
    within the guard radii."""


class QuadratureNonconvergent(ZsWkbError):
    """Adaptive quadrature did not reach the requested tolerance."""


# --- arcs ---

class LostArc(ZsWkbError):
    """Arc continuation lost the Re I = 0 level set (corrector failed after
    step halving)."""


class NoRootInBracket(ZsWkbError):
    """Bracketed root search found no sign change."""


# --- quantize ---

class NonMonotoneAction(ZsWkbError):
    """Im I is not monotone along the arc; quantization inversion refused."""


class NewtonDivergence(ZsWkbError):
    """A Newton iteration left the search region or failed to converge."""


class OracleUnavailable(ZsWkbError):
    """A direct-oracle quantity was requested but could not be computed."""


# --- exactwkb ---

class TurningPointSingularity(ZsWkbError):
    """Evaluation exactly at (or too close to) a turning point where the
    WKB normal form is singular."""


class BranchMismatch(ZsWkbError):
    """Two WKB objects carry incompatible branch states."""


# --- olver ---

class BranchContinuationFailure(ZsWkbError):
    """Phase tracking of the 2/3-power map lost continuity."""


# --- mbf ---

class PhaseOutOfRange(ZsWkbError):
    """Argument phase outside the continuation window |ph t| <= 4*pi/3."""


# --- direct ---

class StepUnderflow(ZsWkbError):
    """ODE integrator step fell below the hardware floor."""


class WindingAmbiguous(ZsWkbError):
    """Argument-principle box boundary passes too close to a root."""
