"""Initial-state descriptors and their phase-space samplers."""

import numpy as np
import pytest
from scipy import stats

from torusecho import (
    GaussianWavepacket,
    InvalidInputError,
    MapSpec,
    PositionEigenstate,
    SampleSet,
    WeightedSample,
    build_state,
    periodized_gaussian_density,
    samples_gaussian,
    samples_position_state,
)

SPEC = MapSpec(0.8, 5e-3, 1000)
SMALL = MapSpec(0.8, 5e-3, 64)


def test_grid_sampler_covers_momentum_grid():
    s = samples_position_state(SPEC, 0.4)
    assert len(s) == 1000
    assert s.kind == "grid"
    assert np.array_equal(s.p, np.arange(1000) / 1000)
    assert np.all(s.q == np.float64(0.4))
    assert np.all(s.weights == s.weights[0])
    assert s.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_grid_sampler_count_must_match_dim():
    assert len(samples_position_state(SMALL, 0.25, count=64)) == 64
    with pytest.raises(InvalidInputError):
        samples_position_state(SMALL, 0.25, count=100)


def test_misaligned_q0_rejected():
    with pytest.raises(InvalidInputError):
        samples_position_state(SMALL, 0.4, count=None)  # 0.4 * 64 = 25.6
    # aligned within 1e-9 * N is accepted
    s = samples_position_state(SPEC, 0.4 + 1e-13)
    assert len(s) == 1000


def test_monte_carlo_sampler_deterministic_per_seed():
    a = samples_position_state(SPEC, 0.4, count=500, mode="monte_carlo", seed=9)
    b = samples_position_state(SPEC, 0.4, count=500, mode="monte_carlo", seed=9)
    c = samples_position_state(SPEC, 0.4, count=500, mode="monte_carlo", seed=10)
    assert np.array_equal(a.p, b.p)
    assert not np.array_equal(a.p, c.p)
    assert a.kind == "monte_carlo"
    assert a.seed == 9
    with pytest.raises(InvalidInputError):
        samples_position_state(SPEC, 0.4, count=None, mode="monte_carlo")
    with pytest.raises(InvalidInputError):
        samples_position_state(SPEC, 0.4, count=10, mode="fancy")


def test_sample_set_sequence_protocol():
    s = samples_position_state(SMALL, 0.25)
    assert len(s) == 64
    item = s[3]
    assert isinstance(item, WeightedSample)
    assert item.point.q == 0.25
    assert item.point.p == 3 / 64
    assert item.weight == pytest.approx(1 / 64)
    assert len(list(iter(s))) == 64


def test_sample_set_validation():
    with pytest.raises(InvalidInputError):
        SampleSet(np.array([]), np.array([]), np.array([]), "grid", "x")
    with pytest.raises(InvalidInputError):
        SampleSet(np.zeros(3), np.zeros(2), np.zeros(3), "grid", "x")
    with pytest.raises(InvalidInputError):
        SampleSet(np.zeros(3), np.zeros(3), np.ones(3) / 3, "other", "x")


@pytest.mark.parametrize("sigma", [0.0, -0.1, 0.5, 0.7])
def test_gaussian_sigma_bounds(sigma):
    with pytest.raises(InvalidInputError):
        GaussianWavepacket(0.4, 0.0, sigma)
    with pytest.raises(InvalidInputError):
        samples_gaussian(SPEC, 0.4, 0.0, sigma, count=10)


def test_gaussian_position_only_mode():
    s = samples_gaussian(SPEC, 0.4, 0.3, 0.05, count=2000, mode="position_only", seed=1)
    assert np.all(s.p == np.float64(0.3))
    assert np.all((s.q >= 0.0) & (s.q < 1.0))
    assert abs(np.std(s.q) - 0.05) < 0.005


def test_gaussian_wigner_momentum_spread():
    sigma = 0.05
    s = samples_gaussian(SPEC, 0.5, 0.0, sigma, count=20000, mode="wigner", seed=2)
    sigma_p = SPEC.hbar / (2 * sigma)
    # unwrap (p0 = 0, mass sits near 0 and just below 1)
    p = np.where(s.p > 0.5, s.p - 1.0, s.p)
    assert abs(np.std(p) - sigma_p) / sigma_p < 0.05
    assert np.all((s.p >= 0.0) & (s.p < 1.0))


def test_wigner_marginals_match_gaussian_law():
    """KS check of both marginals against the target normal laws."""
    sigma = 0.05
    s = samples_gaussian(SPEC, 0.5, 0.0, sigma, count=5000, mode="wigner", seed=11)
    res_q = stats.kstest(s.q, lambda x: stats.norm.cdf(x, 0.5, sigma))
    assert res_q.pvalue > 1e-3
    p = np.where(s.p > 0.5, s.p - 1.0, s.p)
    res_p = stats.kstest(p, lambda x: stats.norm.cdf(x, 0.0, SPEC.hbar / (2 * sigma)))
    assert res_p.pvalue > 1e-3


def test_wigner_position_marginal_matches_quantum_density():
    # empirical cell histogram vs |psi_j|^2 on the same grid
    g = GaussianWavepacket(0.4, 0.0, 0.05)
    psi = build_state(SPEC, g)
    s = samples_gaussian(SPEC, 0.4, 0.0, 0.05, count=20000, mode="wigner", seed=11)
    cells = np.floor(s.q * SPEC.dim_n).astype(int)
    emp = np.bincount(cells, minlength=SPEC.dim_n) / len(s)
    tv = 0.5 * np.abs(emp - psi.position_density).sum()
    assert tv < 0.08  # measured 0.045 at this seed/count


def test_gaussian_count_validation():
    with pytest.raises(InvalidInputError):
        samples_gaussian(SPEC, 0.4, 0.0, 0.05, count=0)
    with pytest.raises(InvalidInputError):
        samples_gaussian(SPEC, 0.4, 0.0, 0.05, count=10, mode="nope")


def test_periodized_density_normalized():
    g = GaussianWavepacket(0.3, 0.0, 0.12)
    grid = np.linspace(0.0, 1.0, 2001, endpoint=False)
    dens = periodized_gaussian_density(g, grid)
    assert dens.min() > 0.0
    assert np.mean(dens) == pytest.approx(1.0, rel=1e-10)


def test_labels():
    assert "position" in PositionEigenstate(0.4).label()
    assert "gaussian" in GaussianWavepacket(0.4, 0.0, 0.05).label()
