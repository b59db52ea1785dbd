"""Semiclassical fidelity decay from dephasing over unperturbed orbits.

The estimator propagates weighted phase-space samples with the
*unperturbed* classical map, accumulates the action difference picked up
from the kick-potential perturbation along each orbit, and averages the
resulting pure phases:

    amp(t) = sum_j w_j * exp(i * dS_j(t) / hbar),    M(t) = |amp(t)|^2

No stability prefactors enter; all decay comes from phase cancellation
across the ensemble.

Determinism contract: samples are processed in fixed chunks of CHUNK
consecutive indices and the per-chunk partial sums are combined in index
order, so results are bitwise identical for any thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import TWO_PI, MapSpec, step_ensemble
from .errors import InvalidInputError
from .initial_states import SampleSet

# fixed work unit; combining per-chunk sums in index order keeps the
# floating-point reduction identical for every thread count
CHUNK = 4096

_CONJUGATION_TOL = 1e-15


@dataclass(frozen=True)
class FidelityCurve:
    """Fidelity amplitude and M(t) = |amp|^2 on steps t = 0..steps.

    stderr_re / stderr_im are per-component standard errors of the complex
    amplitude estimate; they are zero for exact-quadrature ("grid") sample
    sets and for exact quantum curves.
    """

    amplitude: np.ndarray
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    method: str
    spec: MapSpec
    state_label: str
    sample_count: int
    seed: int | None = None
    fidelity: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        amp = np.asarray(self.amplitude, dtype=np.complex128)
        if amp.ndim != 1 or amp.size == 0:
            raise InvalidInputError("amplitude must be a nonempty 1-d array")
        for name in ("stderr_re", "stderr_im"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != amp.shape:
                raise InvalidInputError(f"{name} must match amplitude shape")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "amplitude", amp)
        # re^2 + im^2 rather than abs()**2: exact 1.0 for amp == 1+0j
        object.__setattr__(self, "fidelity", amp.real**2 + amp.imag**2)

    @property
    def steps(self) -> int:
        return len(self.amplitude) - 1

    @property
    def amplitude_re(self) -> np.ndarray:
        return self.amplitude.real

    @property
    def amplitude_im(self) -> np.ndarray:
        return self.amplitude.imag

    @property
    def fidelity_stderr(self) -> np.ndarray:
        """First-order error propagation through M = re^2 + im^2."""
        return 2.0 * np.sqrt(
            (self.amplitude.real * self.stderr_re) ** 2
            + (self.amplitude.imag * self.stderr_im) ** 2
        )


def _chunk_sums(spec, q, p, scale, steps, phase_factor):
    """Raw partial sums over one chunk of samples.

    Returns (S, R2, I2): S[t] = sum_j scale_j z_j(t) as complex,
    R2[t] = sum_j (scale_j Re z_j)^2, I2[t] = sum_j (scale_j Im z_j)^2.
    scale is None for uniform weights (treated as exactly 1, no multiply,
    so the epsilon = 0 sum of ones stays integral).
    """
    q = q.copy()
    p = p.copy()
    cos_sum = np.zeros_like(q)
    n_t = steps + 1
    s_re = np.empty(n_t)
    s_im = np.empty(n_t)
    r2 = np.empty(n_t)
    i2 = np.empty(n_t)

    def record(t):
        phase = phase_factor * cos_sum
        re = np.cos(phase)
        im = np.sin(phase)
        if scale is not None:
            re = scale * re
            im = scale * im
        s_re[t] = re.sum()
        s_im[t] = im.sum()
        r2[t] = (re * re).sum()
        i2[t] = (im * im).sum()

    record(0)
    for t in range(1, n_t):
        cos_sum += np.cos(TWO_PI * q)
        q, p = step_ensemble(spec, q, p, perturbed=False)
        record(t)
    return s_re + 1j * s_im, r2, i2


def dr_curve(
    spec: MapSpec, samples: SampleSet, steps: int, threads: int = 1
) -> FidelityCurve:
    """Dephasing estimate of the fidelity curve on t = 0..steps.

    Parameters
    ----------
    spec : MapSpec
        Map parameters; spec.epsilon is the perturbation strength whose
        accumulated action difference drives the dephasing.
    samples : SampleSet
        Weighted phase-space samples of the initial state.
    steps : int
        Number of map iterations (curve has steps + 1 entries).
    threads : int
        Worker threads for chunk evaluation. Any value >= 1 produces
        bitwise-identical output.

    Notes
    -----
    The phase at step t is dS(t)/hbar with
    dS(t) = (epsilon / (4 pi^2)) * sum_{m<t} cos(2 pi q_m) along the
    unperturbed orbit, i.e. phase = (epsilon N / (2 pi)) * sum cos.
    """
    if not isinstance(steps, (int, np.integer)) or steps < 0:
        raise InvalidInputError(f"steps must be a nonnegative integer, got {steps!r}")
    if not isinstance(threads, (int, np.integer)) or threads < 1:
        raise InvalidInputError(f"threads must be a positive integer, got {threads!r}")
    n = len(samples)
    # dS/hbar with hbar = 1/(2 pi N); zero epsilon gives exactly zero phase
    phase_factor = spec.epsilon * spec.dim_n / TWO_PI

    uniform = samples.uniform
    if uniform:
        scales = None
    else:
        scales = n * samples.weights  # importance ratio relative to uniform

    q = np.asarray(samples.q, dtype=np.float64)
    p = np.asarray(samples.p, dtype=np.float64)
    bounds = [(i, min(i + CHUNK, n)) for i in range(0, n, CHUNK)]

    def job(lo, hi):
        sc = None if scales is None else scales[lo:hi]
        return _chunk_sums(spec, q[lo:hi], p[lo:hi], sc, steps, phase_factor)

    if threads == 1 or len(bounds) == 1:
        parts = [job(lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            futures = [pool.submit(job, lo, hi) for lo, hi in bounds]
            parts = [f.result() for f in futures]  # index order, not completion

    n_t = steps + 1
    s_tot = np.zeros(n_t, dtype=np.complex128)
    r2_tot = np.zeros(n_t)
    i2_tot = np.zeros(n_t)
    for s, r2, i2 in parts:
        s_tot += s
        r2_tot += r2
        i2_tot += i2

    amp = s_tot / n
    if samples.kind == "monte_carlo":
        var_re = np.maximum(r2_tot / n - amp.real**2, 0.0)
        var_im = np.maximum(i2_tot / n - amp.imag**2, 0.0)
        stderr_re = np.sqrt(var_re / n)
        stderr_im = np.sqrt(var_im / n)
    else:
        stderr_re = np.zeros(n_t)
        stderr_im = np.zeros(n_t)

    return FidelityCurve(
        amplitude=amp,
        stderr_re=stderr_re,
        stderr_im=stderr_im,
        method="dr",
        spec=spec,
        state_label=samples.state_label,
        sample_count=n,
        seed=samples.seed,
    )


def dr_conjugation_check(curve_a: FidelityCurve, curve_b: FidelityCurve) -> bool:
    """True when curve_b is the complex conjugate of curve_a.

    Flipping the sign of the perturbation strength negates every
    accumulated phase, so dr curves built from the same samples at +eps
    and -eps must be conjugates of each other. Curves must agree on all
    metadata except the perturbation strength; a mismatch elsewhere
    (different map, state, sample count, seed, or length) is an error
    rather than False.
    """
    for a, b, what in (
        (curve_a.method, curve_b.method, "method"),
        (curve_a.spec.k, curve_b.spec.k, "kick strength"),
        (curve_a.spec.dim_n, curve_b.spec.dim_n, "grid size"),
        (curve_a.state_label, curve_b.state_label, "state"),
        (curve_a.sample_count, curve_b.sample_count, "sample count"),
        (curve_a.seed, curve_b.seed, "seed"),
        (len(curve_a.amplitude), len(curve_b.amplitude), "length"),
    ):
        if a != b:
            raise InvalidInputError(f"curves are not comparable: {what} differs ({a!r} vs {b!r})")
    if curve_a.method != "dr":
        raise InvalidInputError(f"conjugation check applies to dr curves, got {curve_a.method!r}")
    dev = np.abs(curve_b.amplitude - np.conj(curve_a.amplitude)).max()
    return bool(dev <= _CONJUGATION_TOL)
