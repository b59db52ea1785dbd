"""Classical kicked-map dynamics on the unit torus.

The map is the kicked rotor in unit-torus coordinates q, p in [0, 1) with
kick potential W(q) = -(k/4pi^2) cos(2pi q) and perturbation
V(q) = W(q)/k.  One step applies the kick first, then the free drift:

    p' = p - ((k + eps_eff)/2pi) sin(2pi q)   (mod 1)
    q' = q + p'                               (mod 1)

Trajectories accumulate the action difference
dS(T) = -eps * sum_{m<T} V(q_m) = (eps/4pi^2) * sum_{m<T} cos(2pi q_m)
along the *unperturbed* orbit; eps enters only as a multiplicative factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

TWO_PI = 2.0 * math.pi
FOUR_PI_SQ = 4.0 * math.pi**2

# sup_q |V'(q)| for V(q) = -(1/4pi^2) cos(2pi q); used by the shadowing bounds
GRAD_V_SUP = 1.0 / TWO_PI


@dataclass(frozen=True)
class MapSpec:
    """Physical/numerical configuration: kick strength, perturbation, grid size.

    Parameters
    ----------
    k : float
        Kick strength (dimensionless). k ~ 0.8 gives mixed phase space,
        k ~ 10 strong chaos.
    epsilon : float
        Perturbation strength; any finite real.
    dim_n : int
        Hilbert dimension N of the quantized torus (>= 2). Sets the
        effective Planck constant hbar = 1/(2 pi N).
    """

    k: float
    epsilon: float
    dim_n: int
    hbar: float = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.dim_n, (int, np.integer)) or isinstance(self.dim_n, bool):
            raise InvalidInputError(f"dim_n must be an integer, got {self.dim_n!r}")
        if self.dim_n < 2:
            raise InvalidInputError(f"dim_n must be >= 2, got {self.dim_n}")
        if not math.isfinite(self.k):
            raise InvalidInputError(f"k must be finite, got {self.k!r}")
        if not math.isfinite(self.epsilon):
            raise InvalidInputError(f"epsilon must be finite, got {self.epsilon!r}")
        object.__setattr__(self, "dim_n", int(self.dim_n))
        object.__setattr__(self, "k", float(self.k))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "hbar", 1.0 / (TWO_PI * self.dim_n))

    def kick_coefficient(self, perturbed: bool) -> float:
        """Momentum-kick prefactor (k + eps_eff)/2pi of the map."""
        k_eff = self.k + self.epsilon if perturbed else self.k
        return k_eff / TWO_PI

    def with_epsilon(self, epsilon: float) -> "MapSpec":
        return MapSpec(self.k, epsilon, self.dim_n)


@dataclass(frozen=True)
class PhasePoint:
    """A point (q, p) on the unit phase-space torus."""

    q: float
    p: float


@dataclass(frozen=True)
class TrajectoryRecord:
    """An unperturbed orbit plus its accumulated action difference.

    delta_s is (eps/4pi^2) * sum of cos(2pi q_m) over the kick positions
    m = 0..steps-1; it is exactly 0 at steps = 0 and exactly linear in eps.
    """

    start: PhasePoint
    steps: int
    delta_s: float
    orbit: np.ndarray | None = None  # (steps+1, 2) of (q, p) if stored


def wrap_unit(x):
    """Map values onto [0, 1); rounding can push x - floor(x) to 1.0 exactly."""
    out = np.asarray(x, dtype=np.float64)
    out = out - np.floor(out)
    return np.where(out >= 1.0, out - 1.0, out)


def torus_distance(a, b):
    """Shortest-wrap distance per coordinate, sup over coordinates.

    Accepts arrays whose last axis is (q, p); broadcasts over leading axes.
    """
    d = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))
    d = np.minimum(d % 1.0, 1.0 - (d % 1.0))
    return d.max(axis=-1)


def _require_finite(q, p):
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise InvalidInputError("phase-space coordinates must be finite")


def step_ensemble(spec: MapSpec, q, p, perturbed: bool = False):
    """One kick-then-drift map step applied elementwise to coordinate arrays.

    Parameters
    ----------
    q, p : array_like
        Torus coordinates (wrapped onto [0, 1) on input).
    perturbed : bool
        If True evolve under the perturbed map f^eps, else under f^0.

    Returns
    -------
    (q1, p1) : ndarray pair on [0, 1).
    """
    _require_finite(q, p)
    c = spec.kick_coefficient(perturbed)
    q = wrap_unit(q)
    p1 = wrap_unit(wrap_unit(p) - c * np.sin(TWO_PI * q))
    q1 = wrap_unit(q + p1)
    return q1, p1


def step(spec: MapSpec, x: PhasePoint, perturbed: bool = False) -> PhasePoint:
    """Advance a single phase-space point by one map step."""
    q1, p1 = step_ensemble(spec, np.float64(x.q), np.float64(x.p), perturbed)
    return PhasePoint(float(q1), float(p1))


def step_inverse(spec: MapSpec, x: PhasePoint, perturbed: bool = False) -> PhasePoint:
    """Exact inverse map: undo the drift, then undo the kick."""
    _require_finite(x.q, x.p)
    c = spec.kick_coefficient(perturbed)
    q = wrap_unit(np.float64(x.q) - np.float64(x.p))
    p = wrap_unit(np.float64(x.p) + c * np.sin(TWO_PI * q))
    return PhasePoint(float(q), float(p))


def jacobian(spec: MapSpec, x: PhasePoint, perturbed: bool = False) -> np.ndarray:
    """Analytic tangent map of `step` at x, in (q, p) ordering.

    det = 1 exactly in exact arithmetic (the map is area-preserving).
    """
    _require_finite(x.q, x.p)
    kick = (spec.k + (spec.epsilon if perturbed else 0.0)) * math.cos(TWO_PI * x.q)
    return np.array([[1.0 - kick, 1.0], [-kick, 1.0]])


def propagate(
    spec: MapSpec, x0: PhasePoint, steps: int, store_orbit: bool = False
) -> TrajectoryRecord:
    """Run the unperturbed map for `steps` kicks, accumulating delta_s.

    The orbit is always the eps = 0 orbit; spec.epsilon enters only the
    action difference, so records for different eps share bitwise-identical
    orbits.

    Parameters
    ----------
    x0 : PhasePoint
        Initial condition (wrapped onto the torus).
    steps : int
        Number of kicks T >= 0.
    store_orbit : bool
        If True, record all steps+1 visited points.

    Returns
    -------
    TrajectoryRecord
    """
    if steps < 0:
        raise InvalidInputError(f"steps must be >= 0, got {steps}")
    _require_finite(x0.q, x0.p)
    q = wrap_unit(np.float64(x0.q))
    p = wrap_unit(np.float64(x0.p))
    orbit = np.empty((steps + 1, 2)) if store_orbit else None
    cos_sum = np.float64(0.0)
    for m in range(steps):
        if orbit is not None:
            orbit[m, 0] = q
            orbit[m, 1] = p
        cos_sum = cos_sum + np.cos(TWO_PI * q)
        q, p = step_ensemble(spec, q, p, perturbed=False)
    if orbit is not None:
        orbit[steps, 0] = q
        orbit[steps, 1] = p
    # eps scales a factor computed from the orbit alone -> exact linearity in eps
    delta_s = spec.epsilon * float(cos_sum / FOUR_PI_SQ)
    return TrajectoryRecord(
        start=PhasePoint(float(wrap_unit(np.float64(x0.q))), float(wrap_unit(np.float64(x0.p)))),
        steps=steps,
        delta_s=delta_s,
        orbit=orbit,
    )
