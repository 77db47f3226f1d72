"""Tests for the target-distribution and precoder searches."""

import numpy as np
import pytest

from netbricks import optim
from netbricks.channels import BiAwgn, StateChannel, hb
from netbricks.optim import (Infeasible, NegativeRate, OptimError,
                             PowerInfeasible, RatePoint, SearchSpec)


# ---------------------------------------------------------------------------
# domain types

def test_search_spec_validation():
    with pytest.raises(OptimError):
        SearchSpec((), (), "grid", 10, 0)
    with pytest.raises(OptimError):
        SearchSpec((0.0,), (1.0,), "grid", 0, 0)
    with pytest.raises(OptimError):
        SearchSpec((0.0,), (1.0,), "annealing", 10, 0)
    with pytest.raises(OptimError):
        SearchSpec((1.0,), (0.0,), "grid", 10, 0)
    spec = SearchSpec((0.0, 0.0), (1.0, 2.0), "genetic", 5, 3)
    lo, hi = spec.box()
    assert lo.tolist() == [0.0, 0.0] and hi.tolist() == [1.0, 2.0]


def test_rate_point_rejects_negative_rates():
    with pytest.raises(NegativeRate):
        RatePoint({"R1": -0.01}, {"R1": "1 - H(X)"})
    with pytest.raises(OptimError):
        RatePoint({"R1": 0.5}, {})
    rp = RatePoint({"R1": 0.5}, {"R1": "1 - H(X)"})
    assert rp["R1"] == 0.5


# ---------------------------------------------------------------------------
# table entropy helpers

def test_table_helpers_known_values():
    uniform = np.full((2, 2), 0.25)
    assert abs(optim.table_entropy(uniform) - 2.0) < 1e-12
    assert abs(optim.table_mi(uniform, (0,))) < 1e-12
    ident = np.diag([0.5, 0.5])
    assert abs(optim.table_mi(ident, (0,)) - 1.0) < 1e-12
    assert abs(optim.table_cond_entropy(ident, (0,))) < 1e-12
    # H(X2 | X1) for a chain with p(x2=1|x1) = (0.1, 0.4)
    pj = np.array([[0.6 * 0.9, 0.6 * 0.1], [0.4 * 0.6, 0.4 * 0.4]])
    want = 0.6 * hb(0.1) + 0.4 * hb(0.4)
    assert abs(optim.table_cond_entropy(pj, (0,)) - want) < 1e-12


def test_istar_product_zero_and_correlated():
    prod = np.einsum("a,b,c->abc", [0.3, 0.7], [0.5, 0.5], [0.9, 0.1])
    assert abs(optim.istar(prod)) < 1e-12
    # three perfectly aligned bits: 3 * H(X) - H(X) = 2 bits
    aligned = np.zeros((2, 2, 2))
    aligned[0, 0, 0] = aligned[1, 1, 1] = 0.5
    assert abs(optim.istar(aligned) - 2.0) < 1e-12


# ---------------------------------------------------------------------------
# generic maximizers on analytic objectives

def _peak(c):
    return lambda x: 1.0 - float(np.sum((x - c) ** 2))


def test_particle_swarm_finds_quadratic_peak():
    c = np.array([0.3, 0.7, 0.55])
    spec = SearchSpec((0,) * 3, (1,) * 3, "particle-swarm", 80, 0)
    x, f = optim.particle_swarm(_peak(c), spec)
    assert abs(f - 1.0) < 1e-6
    assert np.abs(x - c).max() < 1e-3


def test_genetic_search_finds_quadratic_peak():
    c = np.array([0.3, 0.7])
    spec = SearchSpec((0,) * 2, (1,) * 2, "genetic", 80, 0)
    x, f = optim.genetic_search(_peak(c), spec)
    assert abs(f - 1.0) < 1e-3
    assert np.abs(x - c).max() < 0.05


def test_grid_search_hits_on_grid_optimum():
    spec = SearchSpec((0.0, 0.0), (1.0, 1.0), "grid", 11, 0)
    x, f = optim.grid_search(_peak(np.array([0.2, 0.8])), spec)
    assert abs(f - 1.0) < 1e-12
    assert np.allclose(x, [0.2, 0.8])


def test_grid_search_collapses_degenerate_axes():
    spec = SearchSpec((0.0, 0.4), (1.0, 0.4), "grid", 101, 0)
    x, f = optim.grid_search(_peak(np.array([0.3, 0.4])), spec)
    assert abs(x[1] - 0.4) < 1e-12
    assert abs(f - 1.0) < 1e-12


# ---------------------------------------------------------------------------
# state-channel input maximization

def test_gp_state_free_channel_reduces_to_symmetric():
    ch = StateChannel(2.0, 0.0, 0.1)
    pxs, val = optim.gp_target(ch, step=1.0 / 64, points=801)
    assert np.allclose(pxs, [0.5, 0.5])
    assert abs(val - BiAwgn(2.0).capacity()) < 1e-6


def test_gp_value_dominates_symmetric_on_power_grid():
    powers = np.linspace(0.25, 8.0, 20)
    gaps = []
    for p in powers:
        ch = StateChannel(float(p), 0.9, 0.1)
        _, val = optim.gp_target(ch, step=1.0 / 128, points=401)
        gaps.append(val - optim.gp_symmetric_rate(ch, points=401))
    gaps = np.asarray(gaps)
    # Bern(1/2) independent of the state is always a feasible point
    assert (gaps >= -1e-9).all()
    assert gaps[np.argmin(np.abs(powers - 2.0))] > 0.01


def test_gp_grid_halving_converges():
    ch = StateChannel(2.0, 0.9, 0.1)
    _, coarse = optim.gp_target(ch, step=1.0 / 512, points=801)
    _, fine = optim.gp_target(ch, step=1.0 / 1024, points=801)
    # the halved grid contains the coarse one, so the value cannot drop
    assert fine >= coarse - 1e-12
    assert abs(fine - coarse) < 1e-4


def test_gp_objective_stable_under_quadrature_refinement():
    ch = StateChannel(2.0, 0.9, 0.1)
    a = optim.gp_objective(ch, 0.45, 0.9, points=2001)
    b = optim.gp_objective(ch, 0.45, 0.9, points=4001)
    assert abs(a - b) < 1e-6


# ---------------------------------------------------------------------------
# broadcast sum-rate and precoders

def test_marton_decoupled_links_match_point_to_point():
    p = 4.0
    c = optim.marton_sum_rate(np.full((2, 2), 0.25),
                              optim.precoder_no_precoding(p), p, g=0.0)
    assert abs(c - 2.0 * BiAwgn(p / 2.0).capacity()) < 1e-9


def test_marton_power_infeasible():
    with pytest.raises(PowerInfeasible):
        optim.marton_sum_rate(np.full((2, 2), 0.25), 2.0 * np.eye(2), 1.0)


def test_marton_swarm_matches_grid_oracle():
    p = 4.0
    spec_g = SearchSpec((0,) * 3, (1,) * 3, "grid", 9, 0)
    _, _, c_grid = optim.marton_search(spec_g, p, 0.9, "none", points=301)
    spec_p = SearchSpec((0,) * 3, (1,) * 3, "particle-swarm", 25, 1)
    _, _, c_pso = optim.marton_search(spec_p, p, 0.9, "none", points=301)
    assert c_pso >= c_grid - 1e-9
    assert abs(c_pso - c_grid) < 1e-3


def test_marton_precoding_strategy_ordering():
    p = 4.0
    spec_full = SearchSpec((0, 0, 0, -1, -1, -1, -1),
                           (1, 1, 1, 1, 1, 1, 1), "particle-swarm", 25, 1)
    _, _, c_opt = optim.marton_search(spec_full, p, 0.9, "optimal",
                                      points=301)
    spec_p = SearchSpec((0,) * 3, (1,) * 3, "particle-swarm", 25, 1)
    _, _, c_none = optim.marton_search(spec_p, p, 0.9, "none", points=301)
    spec_w = SearchSpec((-1,) * 4, (1,) * 4, "particle-swarm", 25, 1)
    _, _, c_sym = optim.marton_search(spec_w, p, 0.9, "optimal",
                                      inputs="uniform", points=301)
    c_mmse = optim.independent_sum_rate(optim.precoder_mmse(p), p)
    c_zf = optim.independent_sum_rate(optim.precoder_zf(p), p)
    c_td = optim.time_division_rate(p)
    assert c_opt > c_sym + 0.02
    assert c_opt > c_none + 0.02
    assert c_none > c_mmse + 0.02
    assert c_none > c_zf + 0.02
    assert c_none > c_td + 0.02
    assert c_mmse > c_zf


def test_time_division_split_closed_form():
    l1, l2 = optim.time_division_split(4.0, 0.9)
    assert abs(l1 - 4.0 / 1.81) < 1e-12
    assert abs(l1 + l2 - 4.0) < 1e-12
    # the split maximizes (sqrt(l1) + g sqrt(l2))^2 on the simplex
    best = max(np.sqrt(t) + 0.9 * np.sqrt(4.0 - t)
               for t in np.linspace(0, 4, 1001))
    assert np.sqrt(l1) + 0.9 * np.sqrt(l2) >= best - 1e-6


# ---------------------------------------------------------------------------
# downlink relay search

def _dl_spec(seed, budget=60):
    return SearchSpec((0,) * 18, (1,) * 18, "genetic", budget, seed)


def test_cran_dl_sum_rate_monotone_in_fronthaul():
    vals = []
    for c in (0.35, 0.6, 1.0):
        _, _, cs = optim.cran_dl_search(_dl_spec(2), c, c, 2.5, points=201)
        vals.append(cs)
    assert vals[0] < vals[1] < vals[2]


def test_cran_dl_seed_stable():
    a = optim.cran_dl_search(_dl_spec(2), 1.0, 1.0, 2.5, points=201)[2]
    b = optim.cran_dl_search(_dl_spec(7), 1.0, 1.0, 2.5, points=201)[2]
    assert abs(a - b) < 2e-3


def test_cran_dl_constraints_hold_at_optimum():
    p4, lams, _ = optim.cran_dl_search(_dl_spec(2), 0.6, 0.6, 2.5, points=201)
    m1, m2 = optim.cran_dl_constraints(p4)
    assert m1 < 0.6 and m2 < 0.6
    assert 0 <= lams[0] <= 2.5 and 0 <= lams[1] <= 2.5


def test_cran_dl_infeasible_when_fronthaul_zero():
    with pytest.raises(Infeasible):
        optim.cran_dl_search(_dl_spec(0, budget=2), 0.0, 0.0, 2.5, points=201)


# ---------------------------------------------------------------------------
# uplink relay search

def test_cran_ul_genetic_matches_grid_oracle_on_slice():
    # 2-parameter slice: test channels pinned to the identity map
    lo = (0, 0, 0, 1, 0, 1)
    hi = (1, 1, 0, 1, 0, 1)
    sg = SearchSpec(lo, hi, "grid", 33, 0)
    _, _, c_grid = optim.cran_ul_search(sg, 2.0, 2.0, 4.0)
    se = SearchSpec(lo, hi, "genetic", 40, 3)
    _, _, c_gen = optim.cran_ul_search(se, 2.0, 2.0, 4.0)
    assert abs(c_grid - c_gen) < 1e-3


def test_cran_ul_large_backhaul_reaches_quantized_ceiling():
    # with slack constraints the optimum keeps the quantized observation
    lo = (0, 0, 0, 1, 0, 1)
    hi = (1, 1, 0, 1, 0, 1)
    sg = SearchSpec(lo, hi, "grid", 33, 0)
    _, _, ceiling = optim.cran_ul_search(sg, 2.0, 2.0, 4.0)
    full = SearchSpec((0,) * 6, (1,) * 6, "genetic", 40, 3)
    _, _, c_full = optim.cran_ul_search(full, 2.0, 2.0, 4.0)
    assert abs(c_full - ceiling) < 1e-3


def test_cran_ul_sum_rate_monotone_in_backhaul():
    full = SearchSpec((0,) * 6, (1,) * 6, "genetic", 40, 3)
    vals = [optim.cran_ul_search(full, c, c, 4.0)[2] for c in (0.5, 1.0, 2.0)]
    assert vals[0] < vals[1] < vals[2] + 1e-9


def test_cran_ul_infeasible_when_backhaul_zero():
    spec = SearchSpec((0,) * 6, (1,) * 6, "genetic", 2, 0)
    with pytest.raises(Infeasible):
        optim.cran_ul_search(spec, 0.0, 0.0, 4.0)


# ---------------------------------------------------------------------------
# rate plans

def test_rate_plan_gp_matches_channel_oracles():
    ch = StateChannel(2.0, 0.9, 0.1)
    pxs = np.array([0.494, 0.941])
    rp = optim.rate_plan("gp", {"channel": ch, "pxs": pxs},
                         {"gamma": 3.0 / 16})
    hxy = ch.mixture_given_x(pxs).cond_entropy()
    hxs = ch.joint_xs(pxs).cond_entropy()
    assert abs(rp["R1"] - (1 - hxy - 3.0 / 16)) < 1e-12
    assert abs(rp["R2"] - (1 - hxs)) < 1e-12


def test_rate_plan_lossy_closed_form():
    theta, d, gamma = 0.3, 0.1, 1.0 / 8
    alpha = (theta - d) / (1 - 2 * d)
    rp = optim.rate_plan("lossy", {"theta": theta, "d": d}, {"gamma": gamma})
    # H(Xhat | X) = H(Xhat) + H(X | Xhat) - H(X)
    want_r1 = 1 - (hb(alpha) + hb(d) - hb(theta))
    assert abs(rp["R1"] - want_r1) < 1e-12
    assert abs(rp["R2"] - (1 - hb(alpha) - gamma)) < 1e-12


def test_rate_plan_marton_sum_identity():
    p = 4.0
    gamma = 1.0 / 16
    pj = np.array([[0.4, 0.25], [0.25, 0.1]])
    w = optim.precoder_no_precoding(p)
    from netbricks.channels import VectorChannel2x2
    vch = VectorChannel2x2(optim.h_channel(0.9), w)
    rp = optim.rate_plan("marton", {"p_joint": pj, "vch": vch},
                         {"gamma": gamma})
    lhs = rp["R11"] - rp["R12"] + rp["R21"] - rp["R22"]
    rhs = optim.marton_sum_rate(pj, w, p, 0.9) - 2 * gamma
    assert abs(lhs - rhs) < 1e-9


def test_rate_plan_cran_dl_sum_identity():
    # u1, u2 uniform and correlated; x_j biased so no rate goes negative
    p_u = np.array([[0.35, 0.15], [0.15, 0.35]])
    px_given_u = np.array([0.02, 0.5])
    p4 = np.einsum("ab,ac,bd->abcd", p_u,
                   np.stack([1 - px_given_u, px_given_u], axis=1),
                   np.stack([1 - px_given_u, px_given_u], axis=1))
    lams = (2.0, 2.0)
    gr, gc = 1.0 / 32, 5.0 / 32
    rp = optim.rate_plan("cran_dl", {"p4": p4, "lams": lams},
                         {"gamma_r": gr, "gamma_c": gc})
    lhs = rp["R11"] - rp["R12"] + rp["R21"] - rp["R22"]
    rhs = optim.cran_dl_objective(p4, lams, 0.9) - 2 * gr
    assert abs(lhs - rhs) < 1e-9
    assert abs(rp["R32"] - (1 - hb(0.26) - gc)) < 1e-12


def test_rate_plan_cran_ul_sum_identity():
    table, _ = optim._ul_table(0.25, 0.25, np.array([[0.02, 0.3],
                                                     [0.02, 0.3]]), 4.0, 0.9)
    gr, gc = 1.0 / 32, 1.0 / 32
    rp = optim.rate_plan("cran_ul", {"table": table},
                         {"gamma_r": gr, "gamma_c": gc})
    lhs = rp["R11"] - rp["R12"] + rp["R21"] - rp["R22"]
    rhs = optim.cran_ul_objective(table) - 2 * gr
    assert abs(lhs - rhs) < 1e-9


def test_rate_plan_negative_rate_on_oversized_backoff():
    ch = StateChannel(2.0, 0.9, 0.1)
    with pytest.raises(NegativeRate):
        optim.rate_plan("gp", {"channel": ch, "pxs": np.array([0.5, 0.5])},
                        {"gamma": 1.0})


def test_rate_plan_unknown_kind():
    with pytest.raises(OptimError):
        optim.rate_plan("hybrid", {}, {})
