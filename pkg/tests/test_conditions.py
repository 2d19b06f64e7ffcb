import math

import numpy as np
import pytest

import families as fam
from gmcvx import conditions as C
from gmcvx import matcore
from gmcvx.rng import CounterRng

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# problem validation
# ---------------------------------------------------------------------------


def test_problem_rejects_bad_weights():
    with pytest.raises(C.InvalidProblem):
        C.MixtureProblem(p=[0.5, 0.4], covs=np.stack([np.eye(1), np.eye(1)]), target=np.eye(1))
    with pytest.raises(C.InvalidProblem):
        C.MixtureProblem(p=[1.2, -0.2], covs=np.stack([np.eye(1), np.eye(1)]), target=np.eye(1))


def test_problem_rejects_non_psd():
    with pytest.raises(C.InvalidProblem):
        fam.axis_swap_problem(1.0, 2.0)  # off-diagonal exceeds the diagonal
    with pytest.raises(C.InvalidProblem):
        C.MixtureProblem(
            p=[0.5, 0.5],
            covs=np.stack([np.diag([1.0, -0.5]), np.eye(2)]),
            target=np.eye(2),
        )


def test_problem_rejects_single_component():
    with pytest.raises(C.InvalidProblem):
        C.MixtureProblem(p=[1.0], covs=np.eye(1).reshape(1, 1, 1), target=np.eye(1))


# ---------------------------------------------------------------------------
# directional condition
# ---------------------------------------------------------------------------


def test_inegsqrt_axis_swap_examples():
    assert C.check_inegsqrt(fam.axis_swap_problem(5.0, 0.5)).holds
    inner = C.check_inegsqrt(fam.axis_swap_problem(5.0, 1.5))
    assert inner.fails
    assert C.h_margin(fam.axis_swap_problem(5.0, 1.5), inner.witness) < -1e-9


def test_inegsqrt_equal_components_margin_zero():
    sigma = np.array([[2.0, 0.3], [0.3, 1.0]])
    prob = C.MixtureProblem(p=[0.3, 0.7], covs=np.stack([sigma, sigma]), target=sigma)
    v = C.check_inegsqrt(prob)
    assert v.holds
    assert abs(v.margin) < 1e-9
    assert v.diagnostics.get("boundary")


def test_inegsqrt_scalar_boundary_case():
    prob = C.MixtureProblem(
        p=[0.5, 0.5], covs=np.array([[[1.0]], [[9.0]]]), target=np.array([[4.0]])
    )
    v = C.check_inegsqrt(prob)
    assert v.holds
    assert v.margin == pytest.approx(0.0, abs=1e-14)


def test_inegsqrt_witness_reverifies():
    for seed in range(25):
        prob = fam.random_chain_problem(seed)
        v = C.check_inegsqrt(prob)
        if v.fails:
            assert C.h_margin(prob, v.witness) < 0


def test_inegsqrt_congruence_invariance():
    rng = CounterRng(77)
    checked = 0
    for seed in range(40):
        prob = fam.random_chain_problem(seed)
        v = C.check_inegsqrt(prob)
        if abs(v.margin) < 1e-3 * (1.0 + prob.std_scale()):
            continue  # skip the boundary band
        m = rng.normal_matrix(prob.d, prob.d) + 2.0 * np.eye(prob.d)
        if abs(np.linalg.det(m)) < 0.1:
            continue
        moved = C.MixtureProblem(
            p=prob.p,
            covs=np.stack([m @ c @ m.T for c in prob.covs]),
            target=m @ prob.target @ m.T,
        )
        assert C.check_inegsqrt(moved).status == v.status
        checked += 1
    assert checked >= 20


# ---------------------------------------------------------------------------
# coupling condition
# ---------------------------------------------------------------------------


def test_inecov_rank_deficient_pair_holds_and_witness_validates():
    prob = fam.rank_deficient_pair(0.0)
    v = C.check_inecov(prob)
    assert v.holds
    assert C.validate_gamma_witness(prob, v.witness)["ok"]
    # the reference witness validates too
    assert C.validate_gamma_witness(prob, fam.RANK_DEFICIENT_GAMMA)["ok"]


def test_inecov_axis_swap_boundary_and_equal_blocks():
    v = C.check_inecov(fam.axis_swap_problem(17.0 / 3.0, 1.0 / 3.0))
    assert v.holds

    sigma = np.array([[1.5, 0.4], [0.4, 1.0]])
    prob = C.MixtureProblem(p=[0.25, 0.75], covs=np.stack([sigma, sigma]), target=sigma)
    v = C.check_inecov(prob)
    assert v.holds
    w = v.witness
    for i in range(2):
        for j in range(2):
            assert np.allclose(w.block(i, j), sigma, atol=1e-7)


def test_inecov_fails_through_directional_refutation():
    prob = fam.axis_swap_problem(5.9, 0.0)
    v = C.check_inecov(prob)
    assert v.fails
    assert v.diagnostics["refuted_by"] == "inegsqrt"
    assert C.h_margin(prob, v.witness) < 0


def test_inecov_convexity_of_witnesses():
    prob_a = fam.axis_swap_problem(5.0, 0.8)
    prob_b = fam.axis_swap_problem(4.0, -1.5)
    va, vb = C.check_inecov(prob_a), C.check_inecov(prob_b)
    assert va.holds and vb.holds
    mid = C.MixtureProblem(
        p=prob_a.p,
        covs=prob_a.covs,
        target=0.5 * (prob_a.target + prob_b.target),
    )
    avg = 0.5 * (va.witness.gamma + vb.witness.gamma)
    assert C.validate_gamma_witness(mid, avg)["ok"]


def test_contraction_dual_refutes_outside_point():
    prob = fam.axis_swap_problem(6.1, 0.0)
    val, ks, y = C.contraction_ascent(prob, iters=150)
    assert val < -1e-6
    assert y is not None
    assert C.dual_refutation_value(prob, y) < 0


# ---------------------------------------------------------------------------
# pairwise relaxation
# ---------------------------------------------------------------------------


def test_inecovf_three_diag_gamma_pairwise_but_not_full():
    prob = fam.three_diag_problem(np.eye(2))
    gamma = fam.three_diag_gamma(17.0 / 3.0, 1.0)
    blocks = C.validate_pairwise_blocks(prob, gamma)
    assert all(ok for ok, _ in blocks.values())
    ok, lmin = matcore.is_psd(gamma)
    assert not ok
    assert lmin == pytest.approx(-2.58, abs=0.02)


def test_inecovf_matches_inecov_for_two_components():
    for (a, b) in [(5.0, 0.5), (2.0, 1.0), (5.9, 0.0)]:
        prob = fam.axis_swap_problem(a, b)
        assert C.check_inecovf(prob).status == C.check_inecov(prob).status


def test_inecovf_three_diag_family_holds():
    target = fam.three_diag_target(5.7, 0.99)
    prob = fam.three_diag_problem(target)
    v = C.check_inecovf(prob)
    assert v.holds
    blocks = C.validate_pairwise_blocks(prob, v.witness, tol=1e-7)
    assert all(ok for ok, _ in blocks.values())


def test_inecovf_equal_components():
    sigma = np.array([[1.0, 0.2], [0.2, 0.7]])
    prob = C.MixtureProblem(p=[0.4, 0.3, 0.3], covs=np.stack([sigma] * 3), target=sigma)
    assert C.check_inecovf(prob).holds


# ---------------------------------------------------------------------------
# shared-correlation condition
# ---------------------------------------------------------------------------


def test_correl_three_diag_threshold_certificate():
    prob = fam.three_diag_problem(np.diag([11.0, 11.0]))
    v = C.check_correl_with(prob, np.eye(2))
    assert v.holds
    cert = v.witness
    assert np.allclose(cert.corr, np.eye(2))
    assert np.allclose(cert.mix_scale, (2.0 + SQRT2) * np.ones(2))
    check = C.validate_correl_certificate(prob, cert)
    assert check["ok"], check
    # weighted stack reproduces the combined scale matrix exactly
    stacked = cert.stacked.reshape(3, 2, 2)
    assert np.array_equal(
        sum(p * s for p, s in zip(prob.p, stacked)), np.diag(cert.mix_scale)
    )

    beyond = fam.three_diag_problem(np.diag([12.0, 12.0]))
    assert C.check_correl_with(beyond, np.eye(2)).fails


def test_correl_rank_deficient_pair_fails_and_unknown():
    prob = fam.rank_deficient_pair(0.0)
    v = C.check_correl_with(prob, np.eye(2))
    assert v.fails
    assert v.witness[0] == "dcd_deficit"
    assert C.find_correl_certificate(prob).status is C.Status.UNKNOWN


def test_correl_equal_components_identity():
    sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
    prob = C.MixtureProblem(p=[0.6, 0.4], covs=np.stack([sigma, sigma]), target=sigma)
    assert C.check_correl_with(prob, np.eye(2)).holds


def test_correl_rejects_singular_basis():
    prob = fam.axis_swap_problem(2.0, 0.0)
    with pytest.raises(C.SingularM):
        C.check_correl_with(prob, np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_find_correl_colinear_margin_zero():
    base = np.array([[2.0, 1.0], [1.0, 1.0]])
    prob = C.MixtureProblem(
        p=[0.5, 0.5],
        covs=np.stack([2.0 * base, 8.0 * base]),
        target=4.5 * base,
    )
    v = C.find_correl_certificate(prob)
    assert v.holds
    assert v.diagnostics["generator"] == "identity"
    assert v.diagnostics["colinear_components"]
    assert abs(v.margin) < 1e-9
    # the saturated target shares the correlation of the corrected-diagonal
    # target, which the checker reports
    assert v.diagnostics["sigma_hat_associated"]


def test_correl_sigma_hat_association_flag():
    # diagonal triple: zero off-diagonals match the corrected target exactly
    v = C.check_correl_with(fam.three_diag_problem(np.diag([11.0, 11.0])), np.eye(2))
    assert v.diagnostics["sigma_hat_associated"]
    # interior axis-swap point: the dominating scale matrix is strictly
    # larger than the target's diagonal, so the association fails
    v = C.check_correl_with(fam.axis_swap_problem(2.0, 1.0), np.eye(2))
    assert v.holds
    assert not v.diagnostics["sigma_hat_associated"]


def test_find_correl_commuting_generator():
    rot = np.array([[math.cos(0.7), -math.sin(0.7)], [math.sin(0.7), math.cos(0.7)]])
    covs = np.stack([rot @ np.diag([3.0, 1.0]) @ rot.T, rot @ np.diag([1.0, 4.0]) @ rot.T])
    target = rot @ np.diag([1.2, 1.5]) @ rot.T
    prob = C.MixtureProblem(p=[0.5, 0.5], covs=covs, target=target)
    v = C.find_correl_certificate(prob)
    assert v.holds
    assert v.diagnostics["generator"] in ("commuting", "identity")
    assert C.validate_correl_certificate(prob, v.witness)["ok"]


def test_find_correl_orthogonal_product_generator():
    lam1, lam2, p1 = 3.0, 5.0, 0.4
    rot = np.array([[math.cos(0.3), -math.sin(0.3)], [math.sin(0.3), math.cos(0.3)]])
    covs = np.stack(
        [rot @ np.diag([lam1, 0.0]) @ rot.T, rot @ np.diag([0.0, lam2]) @ rot.T]
    )
    cross = 0.5 * p1 * (1 - p1) * math.sqrt(lam1 * lam2)
    target_diag = np.array([[p1**2 * lam1, cross], [cross, (1 - p1) ** 2 * lam2]])
    prob = C.MixtureProblem(p=[p1, 1 - p1], covs=covs, target=rot @ target_diag @ rot.T)
    v = C.find_correl_certificate(prob)
    assert v.holds
    assert v.diagnostics["generator"] == "orthogonal_product"
    assert C.validate_correl_certificate(prob, v.witness)["ok"]


def test_correl_diagonal_rescaling_invariance():
    prob = fam.three_diag_problem(np.diag([11.0, 11.0]))
    base = C.check_correl_with(prob, np.eye(2))
    assert base.holds
    rng = CounterRng(5)
    for _ in range(5):
        lam = np.diag(np.where(rng.uniforms(2) > 0.5, 1.0, -1.0) * (0.5 + rng.uniforms(2)))
        moved = C.check_correl_with(prob, lam @ np.eye(2))
        assert moved.holds
        signs = np.sign(np.diag(lam))
        expected = np.outer(signs, signs) * base.witness.corr
        assert np.allclose(moved.witness.corr, expected, atol=1e-8)


def test_certificate_to_gamma_validates():
    prob = fam.three_diag_problem(np.diag([11.0, 11.0]))
    cert = C.check_correl_with(prob, np.eye(2)).witness
    gamma = C.certificate_to_gamma(prob, cert)
    assert C.validate_gamma_witness(prob, gamma, tol=1e-7)["ok"]


def test_find_correl_user_supplied_basis():
    prob = fam.rank_deficient_pair(0.0)
    # any user basis still fails here, but the generator must try them
    v = C.find_correl_certificate(prob, extra_m=[np.array([[1.0, 0.5], [0.0, 1.0]])])
    assert v.status is C.Status.UNKNOWN
    tried = [name for name, *_ in v.diagnostics["tried"]]
    assert "user_0" in tried


# ---------------------------------------------------------------------------
# reverse dominance
# ---------------------------------------------------------------------------


def test_dominated_by_single_examples():
    sigma = np.array([[2.0, 0.1], [0.1, 1.0]])
    prob = C.MixtureProblem(p=[0.5, 0.5], covs=np.stack([sigma, sigma]), target=sigma)
    assert C.check_dominated_by_single(prob).holds

    prob = C.MixtureProblem(
        p=[0.5, 0.5],
        covs=np.stack([np.eye(2), np.diag([1.0, 3.0])]),
        target=2.0 * np.eye(2),
    )
    v = C.check_dominated_by_single(prob)
    assert v.fails
    idx, xi = v.witness
    assert idx == 1
    assert abs(abs(xi[1]) - 1.0) < 1e-12

    prob = C.MixtureProblem(
        p=[0.5, 0.5], covs=np.array([[[1.0]], [[4.0]]]), target=np.array([[4.0]])
    )
    assert C.check_dominated_by_single(prob).holds


def test_dominated_by_single_rejects_nonzero_means():
    prob = C.MixtureProblem(
        p=[0.5, 0.5],
        covs=np.stack([np.eye(1), np.eye(1)]),
        target=np.eye(1),
        means=np.array([[1.0], [-1.0]]),
    )
    with pytest.raises(C.NonCenteredMeans):
        C.check_dominated_by_single(prob)


# ---------------------------------------------------------------------------
# explicit pair block
# ---------------------------------------------------------------------------


def test_n2_theta_reference_block():
    a = 17.0 / 3.0
    prob = fam.axis_swap_problem(a, 1.0 / 3.0)
    v = C.check_n2_theta(prob, fam.pair_theta(a))
    assert v.holds


def test_n2_theta_zero_block_and_violation():
    sigma = np.array([[1.0, 0.0], [0.0, 1.0]])
    prob = C.MixtureProblem(
        p=[0.5, 0.5], covs=np.stack([sigma, sigma]), target=0.5 * sigma
    )
    assert C.check_n2_theta(prob, np.zeros((2, 2))).holds

    big = 10.0 * np.eye(2)  # (e1' Theta e1)^2 far beyond the product bound
    v = C.check_n2_theta(prob, big)
    assert v.fails
    assert v.witness[0] == "pair_block"


def test_n2_theta_dimension_errors():
    prob = fam.three_diag_problem(np.eye(2))
    with pytest.raises(C.DimensionMismatch):
        C.check_n2_theta(prob, np.zeros((2, 2)))
    with pytest.raises(C.DimensionMismatch):
        C.check_n2_theta(fam.axis_swap_problem(2.0, 0.0), np.zeros((3, 3)))


# ---------------------------------------------------------------------------
# orthogonal factors
# ---------------------------------------------------------------------------


def test_orthogonal_factors_equal_blocks_identity():
    sigma = np.array([[2.0, 0.5], [0.5, 1.5]])
    prob = C.MixtureProblem(p=[0.5, 0.5], covs=np.stack([sigma, sigma]), target=sigma)
    gamma = np.block([[sigma, sigma], [sigma, sigma]])
    factors, verdict = C.orthogonal_factors_from_gamma(prob, gamma)
    assert verdict.holds
    for o in factors:
        assert matcore.fro_norm(o @ o.T - np.eye(4)) <= 1e-8


def test_orthogonal_factors_rank_deficient_witness():
    prob = fam.rank_deficient_pair(0.0)
    factors, verdict = C.orthogonal_factors_from_gamma(prob, fam.RANK_DEFICIENT_GAMMA)
    assert verdict.holds
    assert verdict.diagnostics["ortho_defect"] <= 1e-8


def test_orthogonal_factors_rejects_small_q():
    prob = fam.rank_deficient_pair(0.0)
    with pytest.raises(C.DimensionMismatch):
        C.orthogonal_factors_from_gamma(prob, fam.RANK_DEFICIENT_GAMMA, q=3)


# ---------------------------------------------------------------------------
# implication chain
# ---------------------------------------------------------------------------


def test_chain_separation_problem():
    report = C.implication_chain_report(fam.rank_deficient_pair(0.0), mc_samples=10000)
    assert report.correl.status is C.Status.UNKNOWN
    assert report.inecov.holds
    assert report.inecovf.holds
    assert report.inegsqrt.holds


def test_chain_interior_point_all_holds():
    report = C.implication_chain_report(fam.axis_swap_problem(2.0, 1.0), mc_samples=10000)
    assert report.correl.holds
    assert report.inecov.holds
    assert report.inecovf.holds
    assert report.inegsqrt.holds
    assert report.order_evidence.holds


def test_chain_scaled_up_target_all_fail():
    base = fam.axis_swap_problem(2.0, 1.0)
    prob = C.MixtureProblem(p=base.p, covs=base.covs, target=100.0 * base.target)
    report = C.implication_chain_report(prob, mc_samples=10000)
    assert report.inegsqrt.fails
    assert report.inecov.fails
    assert report.inecovf.fails
    assert report.order_evidence.fails
