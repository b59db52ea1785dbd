"""Initial quantum states and their weighted phase-space samplers.

Three state families feed the dephasing estimator:

* position eigenstates -- fixed grid-aligned q0, momenta spread over the
  torus (full grid by default, one sample per momentum grid point);
* Gaussian wavepackets -- positions drawn from |psi(q)|^2 with either a
  fixed mean momentum or momenta drawn from the Gaussian Wigner function;
* an abstract WignerSampler hook for general (possibly signed) weights.

Samplers are deterministic functions of (spec, params, seed); the stream
is counter-based (Philox) so partitioned generation can reproduce any
index range independently.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .dynamics import TWO_PI, MapSpec, PhasePoint, wrap_unit
from .errors import InvalidInputError

# relative size below which periodized-Gaussian image terms are dropped
_IMAGE_TRUNCATION = 1e-16

_GRID_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class WeightedSample:
    """One phase-space sample; weight may be negative for general Wigner sources."""

    point: PhasePoint
    weight: float


@dataclass(frozen=True)
class SampleSet:
    """Vectorized container of weighted samples (sequence of WeightedSample).

    kind is "grid" for exact-quadrature sets (deterministic, no statistical
    error bars) or "monte_carlo" for seeded random draws.
    """

    q: np.ndarray
    p: np.ndarray
    weights: np.ndarray
    kind: str
    state_label: str
    seed: int | None = None

    def __post_init__(self):
        if len(self.q) == 0:
            raise InvalidInputError("sample set must be nonempty")
        if not (len(self.q) == len(self.p) == len(self.weights)):
            raise InvalidInputError("q, p, weights must have equal lengths")
        if self.kind not in ("grid", "monte_carlo"):
            raise InvalidInputError(f"unknown sample kind {self.kind!r}")

    def __len__(self):
        return len(self.q)

    def __iter__(self):
        for i in range(len(self.q)):
            yield self[i]

    def __getitem__(self, i) -> WeightedSample:
        return WeightedSample(
            PhasePoint(float(self.q[i]), float(self.p[i])), float(self.weights[i])
        )

    @property
    def uniform(self) -> bool:
        """True when every weight equals 1/len (enables exact-mean reduction)."""
        return bool(np.all(self.weights == self.weights[0]))


class InitialState(ABC):
    """Marker base for initial-state descriptors."""

    @abstractmethod
    def label(self) -> str:
        """Short descriptor used in curve metadata and output sidecars."""


@dataclass(frozen=True)
class PositionEigenstate(InitialState):
    """|q0> with q0 on the position grid (q0 * N integral)."""

    q0: float

    def label(self) -> str:
        return f"position(q0={self.q0!r})"


@dataclass(frozen=True)
class GaussianWavepacket(InitialState):
    """Periodized Gaussian centered at (q0, p0) with position width sigma.

    sigma is the standard deviation of |psi(q)|^2, in torus units; it must
    sit in (0, 0.5) so the packet is localized on the torus.
    """

    q0: float
    p0: float
    sigma: float

    def __post_init__(self):
        if not (0.0 < self.sigma < 0.5):
            raise InvalidInputError(f"sigma must lie in (0, 0.5), got {self.sigma!r}")

    def label(self) -> str:
        return f"gaussian(q0={self.q0!r},p0={self.p0!r},sigma={self.sigma!r})"


class WignerSampler(InitialState):
    """Abstract weighted-sample source for general Wigner distributions.

    Weights may be signed; only nonnegative-Wigner states ship in-tree.
    """

    @abstractmethod
    def sample(self, spec: MapSpec, count: int, seed: int) -> SampleSet:
        """Draw `count` weighted phase-space samples."""

    def label(self) -> str:
        return f"wigner_sampler({type(self).__name__})"


def grid_index(spec: MapSpec, q0: float) -> int:
    """Grid index of a grid-aligned position; error if q0*N is not integral."""
    j = q0 * spec.dim_n
    j_round = round(j)
    if not math.isfinite(j) or abs(j - j_round) > _GRID_ALIGN_TOL:
        raise InvalidInputError(
            f"q0={q0!r} is not aligned to the N={spec.dim_n} position grid"
        )
    return int(j_round) % spec.dim_n


def _rng(seed: int) -> np.random.Generator:
    # Philox: counter-based, so substreams are reproducible under partitioning
    return np.random.Generator(np.random.Philox(key=seed))


def samples_position_state(
    spec: MapSpec,
    q0: float,
    count: int | None = None,
    mode: str = "grid",
    seed: int = 0,
) -> SampleSet:
    """Weighted samples representing a position eigenstate.

    Parameters
    ----------
    q0 : float
        Grid-aligned position; all samples share it.
    count : int or None
        Sample count. Grid mode forces count = N (pass None or N);
        monte_carlo mode requires count >= 1.
    mode : {"grid", "monte_carlo"}
        Grid mode returns the N equally spaced momenta j/N, weight 1/N each.
        monte_carlo draws momenta uniformly on [0, 1), weight 1/count.
    seed : int
        Stream key; ignored by grid mode.
    """
    grid_index(spec, q0)  # alignment check
    q_val = np.float64(q0)
    if mode == "grid":
        n = spec.dim_n
        if count is not None and count != n:
            raise InvalidInputError(
                f"grid mode yields exactly N={n} samples; got count={count}"
            )
        p = np.arange(n, dtype=np.float64) / n
        q = np.full(n, q_val)
        w = np.full(n, 1.0 / n)
        return SampleSet(q, p, w, "grid", f"position(q0={q0!r})", seed=None)
    if mode == "monte_carlo":
        if count is None or count < 1:
            raise InvalidInputError(f"monte_carlo mode requires count >= 1, got {count}")
        p = _rng(seed).random(count)
        q = np.full(count, q_val)
        w = np.full(count, 1.0 / count)
        return SampleSet(q, p, w, "monte_carlo", f"position(q0={q0!r})", seed=seed)
    raise InvalidInputError(f"unknown mode {mode!r}")


def samples_gaussian(
    spec: MapSpec,
    q0: float,
    p0: float,
    sigma: float,
    count: int,
    mode: str = "wigner",
    seed: int = 0,
) -> SampleSet:
    """Weighted samples for a Gaussian wavepacket.

    position_only: q ~ |psi(q)|^2 (wrapped normal, std sigma), p fixed at p0.
    wigner: (q, p) from the Gaussian Wigner function -- wrapped normals with
    position std sigma and momentum std hbar/(2 sigma). Valid while the
    packet is well localized (images overlapping across the torus fall below
    sampling resolution for sigma <~ 0.15).

    Draw order is q then p from one Philox stream keyed by `seed`.
    """
    state = GaussianWavepacket(q0, p0, sigma)  # validates sigma
    if count < 1:
        raise InvalidInputError(f"count must be >= 1, got {count}")
    rng = _rng(seed)
    q = wrap_unit(q0 + sigma * rng.standard_normal(count))
    if mode == "position_only":
        p = np.full(count, np.float64(p0))
    elif mode == "wigner":
        sigma_p = spec.hbar / (2.0 * sigma)
        p = wrap_unit(p0 + sigma_p * rng.standard_normal(count))
    else:
        raise InvalidInputError(f"unknown mode {mode!r}")
    w = np.full(count, 1.0 / count)
    return SampleSet(q, p, w, "monte_carlo", state.label(), seed=seed)


def periodized_gaussian_density(state: GaussianWavepacket, q) -> np.ndarray:
    """Wrapped-normal position density of the wavepacket, sum over images.

    Image terms below 1e-16 of the peak are dropped; the wrapped density
    integrates to 1 over [0, 1) exactly (it is a reshuffled normal density).
    """
    q = np.asarray(q, dtype=np.float64)
    # exp(-d^2/(2 sigma^2)) < 1e-16  <=>  |d| > sigma * sqrt(-2 ln 1e-16)
    reach = state.sigma * math.sqrt(-2.0 * math.log(_IMAGE_TRUNCATION))
    n_images = int(math.ceil(reach)) + 1
    dens = np.zeros_like(q)
    norm = 1.0 / (state.sigma * math.sqrt(TWO_PI))
    for n in range(-n_images, n_images + 1):
        d = q + n - state.q0
        dens += norm * np.exp(-0.5 * (d / state.sigma) ** 2)
    return dens
