import json

import numpy as np
import pytest

from probenoise.dilation import BlockUnitary, complete_dilation, membership_check, probe_state
from probenoise.errors import NotMember
from probenoise.linalg import dag, max_abs
from probenoise.povm import Povm, povm_corpus, random_povm
from probenoise.random_measures import (
    UnitarySampler,
    haar_design_moments,
    monte_carlo_average,
    probe_equivalence_check,
    sample_haar_unitary,
    sample_nice_unitary,
    zero_moment_check,
)
from probenoise.robustness import fourier_example


def test_haar_scalar_has_unit_modulus():
    z = sample_haar_unitary(1, np.random.default_rng(0), size=100)
    assert np.allclose(np.abs(z), 1.0)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_haar_draws_are_unitary(d):
    z = sample_haar_unitary(d, np.random.default_rng(d), size=200)
    assert max_abs(dag(z) @ z - np.eye(d)) < 1e-10


@pytest.mark.parametrize("d", [2, 3, 4])
def test_haar_centred_design_moments(d):
    m = 20000
    x = np.diag(np.arange(1.0, d + 1.0))
    mom = haar_design_moments(d, m, seed=d, x=x)
    # entries of Z have variance 1/d; entries of Z X Z^* are bounded by ||X||
    se_z = 1 / np.sqrt(d * m)
    assert mom["E[Z]"] <= 4 * se_z
    assert mom["E[ZX]"] <= 4 * se_z * np.abs(x).sum(axis=0).max()
    assert mom["E[Z*X]"] <= 4 * se_z * np.abs(x).sum(axis=0).max()
    assert mom["E[ZXZ*]-Tr(X)/d I"] <= 5 * d / np.sqrt(m)


def test_haar_mean_d3():
    m = 20000
    mom = haar_design_moments(3, m, seed=42)
    assert mom["E[Z]"] <= 4 / np.sqrt(m)
    assert mom["E[ZXZ*]-Tr(X)/d I"] <= 5 * 3 / np.sqrt(m)


def test_haar_phase_fix_matters():
    # Haar gives E[Z_00] = 0; plain QR without the phase correction gives about 0.43 here
    z = sample_haar_unitary(2, np.random.default_rng(9), size=20000)
    assert abs(z[:, 0, 0].mean()) < 4 / np.sqrt(2 * 20000)


def test_haar_left_invariance_statistic():
    rng = np.random.default_rng(1)
    v = sample_haar_unitary(3, rng)
    z = sample_haar_unitary(3, rng, size=20000)
    # |(VZ)_00|^2 has mean 1/d under Haar, same as |Z_00|^2
    a = np.mean(np.abs(z[:, 0, 0]) ** 2)
    b = np.mean(np.abs((v @ z)[:, 0, 0]) ** 2)
    assert abs(a - 1 / 3) < 0.01 and abs(b - 1 / 3) < 0.01


def test_nice_samples_are_members():
    p = random_povm(3, 3, np.random.default_rng(0))
    u0 = complete_dilation(p, seed=0)
    draws = sample_nice_unitary(u0, np.random.default_rng(1), size=50)
    for m in draws:
        u = BlockUnitary(m, 3)
        assert membership_check(u, p)


def test_nice_single_outcome_returns_base():
    u0 = complete_dilation(Povm([np.eye(2)]))
    assert np.array_equal(sample_nice_unitary(u0, np.random.default_rng(0)).matrix, u0.matrix)


def test_nice_sampler_rejects_non_member():
    p = random_povm(2, 3, np.random.default_rng(0))
    u0 = complete_dilation(random_povm(2, 3, np.random.default_rng(1)))
    with pytest.raises(NotMember):
        monte_carlo_average(UnitarySampler.nice(u0), np.eye(3) / 3, p, 100)


def test_zero_moments():
    u0 = complete_dilation(random_povm(3, 3, np.random.default_rng(0)), seed=0)
    rep = zero_moment_check(u0, 10000, seed=3)
    assert rep.passed and rep.bound == pytest.approx(0.05)


def test_basis_probe_average_is_exact():
    a = fourier_example()[0]
    rep = monte_carlo_average(UnitarySampler.haar(3, 0), probe_state("basis"), a, 500)
    assert rep.max_deviation < 1e-12


def test_two_outcome_average():
    a = fourier_example()[0]
    rep = monte_carlo_average(UnitarySampler.haar(3, 5), probe_state("probabilistic", 0.3), a, 20000)
    expected0 = 0.7 * a[0] + 0.3 * (2 / 3) * np.eye(3)
    assert max_abs(rep.expected[0] - expected0) < 1e-15
    assert rep.passed
    assert rep.max_deviation <= 0.02


def test_two_outcome_average_random_vw():
    a = fourier_example()[0]
    rep = monte_carlo_average(UnitarySampler.haar(3, 5, randomize_vw=True), probe_state("cat", 0.3), a, 20000)
    assert rep.passed


def test_general_average_on_corpus():
    for k, p in enumerate(povm_corpus(6, seed=8, max_dim=3)):
        n = p.n_outcomes
        beta = np.diag([0.6] + [0.4 / (n - 1)] * (n - 1))
        u0 = complete_dilation(p, seed=k)
        rep = monte_carlo_average(UnitarySampler.nice(u0, k), beta, p, 10000)
        assert rep.passed, rep.to_json()


def test_gamma_hat_columns_sum_to_one():
    p = random_povm(3, 3, np.random.default_rng(2))
    rep = monte_carlo_average(UnitarySampler.nice(complete_dilation(p), 1), np.eye(3) / 3, p, 2000)
    assert np.allclose(rep.gamma_hat.sum(axis=0), 1.0, atol=1e-9)
    assert np.allclose(rep.gamma_hat[:, 0], p.traces() / p.dim, atol=1e-12)


def test_report_json_and_determinism():
    a = fourier_example()[0]
    r1 = monte_carlo_average(UnitarySampler.haar(3, 7), probe_state("probabilistic", 0.3), a, 6000)
    r2 = monte_carlo_average(UnitarySampler.haar(3, 7), probe_state("probabilistic", 0.3), a, 6000)
    j1, j2 = json.dumps(r1.to_json()), json.dumps(r2.to_json())
    assert j1 == j2
    assert np.array_equal(r1.mean_effects, r2.mean_effects)
    keys = set(r1.to_json())
    assert {"M", "max_deviation", "tolerance", "pass", "per_effect_deviations"} <= keys
    assert all(x >= 0 for x in r1.per_effect_deviations)


def test_absolute_tolerance_override():
    a = fourier_example()[0]
    rep = monte_carlo_average(UnitarySampler.haar(3, 1), probe_state("probabilistic", 0.3), a, 200, tol=1e-9)
    assert not rep.passed and rep.to_json()["tolerance"] == 1e-9


def test_probe_equivalence_t0_exact():
    rep = probe_equivalence_check(fourier_example()[0], 0.0, 500)
    assert rep.max_difference == 0.0


@pytest.mark.parametrize("t", [0.4, 1.0])
def test_probe_equivalence(t):
    rep = probe_equivalence_check(fourier_example()[0], t, 20000, seed=2)
    assert rep.passed
    assert rep.max_difference <= 0.02
