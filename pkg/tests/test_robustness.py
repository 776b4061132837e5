import numpy as np
import pytest

from probenoise.errors import DimensionMismatch, PhysicalNeedsTwoPlusOutcomes
from probenoise.linalg import max_abs
from probenoise.povm import (
    NoiseModel,
    Povm,
    apply_noise,
    bloch_vector,
    busch_margin,
    check_marginals,
    random_povm,
    unbiased_qubit_povm,
)
from probenoise.robustness import (
    build_dual,
    build_primal,
    certificate_report,
    compatibility_region,
    dual_value,
    fourier_example,
    is_compatible,
    max_compatible_q,
    pair_corpus,
    qubit_mub_example,
    ray_level,
    robustness,
    solve_dual,
)
from probenoise.sdp import solve

MODELS = ["uniform", "depolarizing", "physical"]
# values cross-checked against an independent conic solver (see test_fourier_against_cvxpy)
FOURIER_ALPHA = {"uniform": 0.8551864, "depolarizing": 0.8426770, "physical": 0.8594561}


def busch_alpha(ra, rb):
    """Robustness of an unbiased qubit pair: noise scales both Bloch vectors."""
    s = np.linalg.norm(np.add(ra, rb)) + np.linalg.norm(np.subtract(ra, rb))
    return min(1.0, 2.0 / s)


def random_bloch(rng, max_len=1.0):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v) * rng.uniform(0.2, max_len)


def test_trivial_pair():
    p = Povm([np.eye(2) / 2, np.eye(2) / 2])
    for m in MODELS:
        assert robustness(p, p, m).alpha_star == pytest.approx(1.0, abs=1e-8)


def test_commuting_diagonal_pair():
    a = Povm([np.diag([0.2, 0.5, 0.9]), np.diag([0.8, 0.5, 0.1])])
    b = Povm([np.diag([0.6, 0.1, 0.3]), np.diag([0.1, 0.6, 0.3]), np.diag([0.3, 0.3, 0.4])])
    for m in MODELS:
        assert robustness(a, b, m).alpha_star == pytest.approx(1.0, abs=1e-6)


def test_identical_random_pair():
    p = random_povm(3, 3, np.random.default_rng(0))
    assert robustness(p, p, "physical").alpha_star == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("model", MODELS)
def test_sharp_qubit_pair(model):
    r = robustness(*qubit_mub_example(), model)
    assert r.alpha_star == pytest.approx(1 / np.sqrt(2), abs=1e-5)
    assert r.status == "optimal"


def test_busch_alpha_corpus():
    rng = np.random.default_rng(10)
    for _ in range(15):
        ra, rb = random_bloch(rng), random_bloch(rng)
        a, b = unbiased_qubit_povm(ra), unbiased_qubit_povm(rb)
        assert robustness(a, b, "uniform").alpha_star == pytest.approx(busch_alpha(ra, rb), abs=1e-6)


@pytest.mark.parametrize("model", MODELS)
def test_fourier_values(model):
    a, b = fourier_example()
    r = robustness(a, b, model)
    assert r.alpha_star == pytest.approx(FOURIER_ALPHA[model], abs=1e-6)
    assert abs(r.alpha_star - solve_dual(a, b, model).primal_objective) <= 1e-6


def test_fourier_ordering():
    a, b = fourier_example()
    vals = {m: robustness(a, b, m).alpha_star for m in MODELS}
    assert vals["physical"] >= max(vals["uniform"], vals["depolarizing"]) - 1e-6


def test_fourier_against_cvxpy():
    cp = pytest.importorskip("cvxpy")
    a, b = fourier_example()
    for m in MODELS:
        ta, tb = NoiseModel(m).weights(a), NoiseModel(m).weights(b)
        al = cp.Variable()
        c = [[cp.Variable((3, 3), hermitian=True) for _ in range(2)] for _ in range(2)]
        cons = [al <= 1, al >= 0] + [c[i][j] >> 0 for i in range(2) for j in range(2)]
        cons += [c[i][0] + c[i][1] == al * a[i] + (1 - al) * ta[i] * np.eye(3) for i in range(2)]
        cons += [c[0][j] + c[1][j] == al * b[j] + (1 - al) * tb[j] * np.eye(3) for j in range(2)]
        cp.Problem(cp.Maximize(al), cons).solve(solver="CLARABEL")
        assert robustness(a, b, m).alpha_star == pytest.approx(float(al.value), abs=1e-6)


@pytest.mark.parametrize("model", MODELS)
def test_certificates(model):
    a, b = fourier_example()
    r = robustness(a, b, model)
    rep = check_marginals(r.joint, apply_noise(a, model, r.alpha_star), apply_noise(b, model, r.alpha_star), tol=1e-6)
    assert rep.passed
    assert r.dual_psd_margin >= -1e-8
    assert r.trace_slack(a, b) >= -1e-8
    # the dual objective evaluated at the extracted multipliers reproduces alpha*
    assert dual_value(a, b, r.x, r.y) == pytest.approx(r.alpha_star, abs=1e-6)
    assert certificate_report(r).passed
    assert -1e-9 <= r.alpha_star <= 1 + 1e-9


def test_primal_dual_agree_on_corpus():
    for a, b in pair_corpus(12, seed=5, max_dim=4, max_outcomes=4):
        for m in MODELS:
            r = robustness(a, b, m)
            assert abs(r.alpha_star - solve_dual(a, b, m).primal_objective) <= 1e-6
            assert r.dual_psd_margin >= -1e-8 and r.trace_slack(a, b) >= -1e-8


def test_trivial_dual_optimum():
    p = Povm([np.eye(2) / 2, np.eye(2) / 2])
    assert solve_dual(p, p, "uniform").primal_objective == pytest.approx(1.0, abs=1e-7)


def test_dual_sharp_qubit():
    assert solve_dual(*qubit_mub_example(), "uniform").primal_objective == pytest.approx(1 / np.sqrt(2), abs=1e-5)


def test_unequal_outcome_counts():
    rng = np.random.default_rng(1)
    a, b = random_povm(3, 2, rng), random_povm(3, 4, rng)
    r = robustness(a, b, "physical")
    assert r.joint.shape == (2, 4)
    assert abs(r.alpha_star - solve_dual(a, b, "physical").primal_objective) <= 1e-6


def test_errors():
    with pytest.raises(DimensionMismatch):
        build_primal(random_povm(2, 2, np.random.default_rng(0)), random_povm(3, 2, np.random.default_rng(0)), "uniform")
    one = Povm([np.eye(2)])
    with pytest.raises(PhysicalNeedsTwoPlusOutcomes):
        build_dual(one, one, "physical")


def test_alpha_one_iff_compatible():
    rng = np.random.default_rng(3)
    # a POVM and a coarse-graining of it are compatible
    fine = random_povm(3, 4, rng)
    coarse = Povm([fine[0] + fine[1], fine[2] + fine[3]])
    assert robustness(fine, coarse, "uniform").alpha_star == pytest.approx(1.0, abs=1e-6)
    # sharp non-commuting pairs are not
    assert robustness(*qubit_mub_example(), "uniform").alpha_star < 1 - 1e-3


def test_sdp_verdict_matches_busch():
    rng = np.random.default_rng(4)
    checked = 0
    for _ in range(6):
        ra, rb = random_bloch(rng), random_bloch(rng)
        a, b = unbiased_qubit_povm(ra), unbiased_qubit_povm(rb)
        for level in (0.3, 0.6, 0.8, 0.95):
            margin = busch_margin(level * np.asarray(ra), level * np.asarray(rb))
            if abs(margin) < 1e-5:
                continue
            noisy_a, noisy_b = apply_noise(a, "uniform", level), apply_noise(b, "uniform", level)
            assert np.allclose(bloch_vector(noisy_a), level * ra)
            assert is_compatible(a, b, "uniform", level, level) == (margin >= 0)
            checked += 1
    assert checked >= 20


def test_ray_level_at_origin():
    a, b = qubit_mub_example()
    assert ray_level(a, b, "uniform", 0.0, 0.0) == pytest.approx(1.0, abs=1e-8)


def test_max_q_and_pointwise_agree():
    a, b = fourier_example()
    for p in (0.2, 0.8, 1.0):
        q, grid = max_compatible_q(a, b, "physical", p)
        assert ray_level(a, b, "physical", p, q) >= 1 - 1e-6
        if q < 1:
            assert not is_compatible(a, b, "physical", p, min(1.0, q + 1e-3))


def test_region_commuting_is_full():
    a = Povm([np.diag([0.2, 0.9]), np.diag([0.8, 0.1])])
    b = Povm([np.diag([0.5, 0.3]), np.diag([0.5, 0.7])])
    reg = compatibility_region(a, b, "uniform", 6)
    assert reg.compatible.all()


def test_region_properties_and_csv():
    a, b = fourier_example()
    reg = compatibility_region(a, b, "depolarizing", 11)
    assert reg.compatible[0, 0]
    assert reg.is_monotone()
    assert reg.certificate_deviation <= 1e-6
    lines = reg.to_csv().splitlines()
    assert lines[0] == "p,q,compatible" and len(lines) == 1 + 121
    assert lines[1] == "0,0,1"


def test_region_methods_agree():
    a, b = qubit_mub_example()
    rows = compatibility_region(a, b, "uniform", 9)
    points = compatibility_region(a, b, "uniform", 9, method="pointwise")
    assert np.array_equal(rows.compatible, points.compatible)
    # Busch: p^2 + q^2 <= 1 for orthogonal sharp qubits
    lv = rows.levels
    expected = lv[:, None] ** 2 + lv[None, :] ** 2 <= 1 + 1e-9
    assert np.array_equal(rows.compatible, expected)


def test_region_workers_match_serial():
    a, b = qubit_mub_example()
    r1 = compatibility_region(a, b, "physical", 5)
    r2 = compatibility_region(a, b, "physical", 5, workers=2)
    assert np.array_equal(r1.compatible, r2.compatible)
    assert r1.to_csv() == r2.to_csv()


def test_joint_shape_and_primal_blocks():
    a, b = fourier_example()
    prob = build_primal(a, b, "uniform")
    assert prob.blocks == [6, 6, 6, 6, 1, 1]
    sol = solve(prob)
    assert -sol.primal_objective == pytest.approx(FOURIER_ALPHA["uniform"], abs=1e-6)


def test_grid_marginals_of_region_certificate():
    a, b = fourier_example()
    p = 0.5
    q, grid = max_compatible_q(a, b, "uniform", p)
    from probenoise.povm import JointPovm

    rep = check_marginals(JointPovm(grid), apply_noise(a, "uniform", p), apply_noise(b, "uniform", q))
    assert rep.passed
    assert max_abs(grid.sum(axis=(0, 1)) - np.eye(3)) < 1e-7
