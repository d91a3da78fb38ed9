import numpy as np
import pytest

from ctsmid.errors import BoundEstimationError
from ctsmid.lti import ContinuousTf, MimoModel, tustin_map
from ctsmid.nlp import (
    auglag_minimize,
    estimate_delta_bound,
    fixed_theta_program,
    refine_theta_e,
)
from ctsmid.pop import ObjectiveSpec, build_pop
from ctsmid.sdp import solve
from ctsmid.signals import DeltaBoundSpec, NoiseSpec, SignalSpec, make_dataset

EX1 = ContinuousTf(alpha=[16.3, 2.2], beta=[-21.0, 10.5])
EX2 = ContinuousTf(alpha=[100.0, 20.0, 8.0], beta=[103.0, 36.0, 11.0])
TRUTH1 = np.array([16.3, 2.2, -21.0, 10.5])


def example1_dataset(N=30, eta_cap=2.0, seed=0, actual_eta=True):
    spec = SignalSpec.random_multisine(50, 0.1, seed=seed)
    noise = NoiseSpec(eta_caps=(eta_cap if actual_eta else 0.0,), eps_caps=(0.0,))
    ds = make_dataset(MimoModel.siso(EX1), spec, 0.05, N, noise, seed=seed)
    if not actual_eta and eta_cap > 0.0:
        # declared caps wider than the (zero) realized noise
        ds = type(ds)(T_s=ds.T_s, u_tilde=ds.u_tilde, y_tilde=ds.y_tilde,
                      eps_lo=ds.eps_lo, eps_hi=ds.eps_hi,
                      eta_lo=np.full_like(ds.eta_lo, -eta_cap),
                      eta_hi=np.full_like(ds.eta_hi, eta_cap),
                      u_true=ds.u_true, y_true=ds.y_true, true_model=ds.true_model)
    return ds


# --- fixed-theta conic programs ---------------------------------------------

def test_fixed_theta_feasible_at_truth():
    ds = example1_dataset(N=25, eta_cap=2.0, actual_eta=False)
    prob, _ = fixed_theta_program(ds, [[2]], TRUTH1,
                                  DeltaBoundSpec(kind="uniform", d=0.0), d=0.0)
    sol = solve(prob, tol=1e-9)
    assert sol.ok


def test_fixed_theta_infeasible_sign_flip():
    ds = example1_dataset(N=25, eta_cap=0.05, actual_eta=False)
    theta = np.array([16.3, 2.2, 21.0, -10.5])  # numerator sign flipped
    prob, _ = fixed_theta_program(ds, [[2]], theta,
                                  DeltaBoundSpec(kind="uniform", d=0.0), d=0.0)
    sol = solve(prob, tol=1e-9)
    assert sol.status == "infeasible"


def test_fixed_theta_min_d_at_truth_small():
    ds = example1_dataset(N=25, eta_cap=2.0, actual_eta=False)
    prob, layout = fixed_theta_program(ds, [[2]], TRUTH1,
                                       DeltaBoundSpec(kind="uniform", d=0.0),
                                       objective="min_d")
    sol = solve(prob, tol=1e-9)
    assert sol.ok
    # caps of 2 already absorb the Tustin error of the truth
    assert sol.y[layout["d"]] <= 1e-6


# --- augmented Lagrangian ----------------------------------------------------

def test_auglag_reaches_feasibility_from_truth():
    ds = example1_dataset(N=20, eta_cap=2.0, actual_eta=False)
    prob = build_pop(ds, [[2]], DeltaBoundSpec(kind="uniform", d=0.0),
                     objective=ObjectiveSpec(kind="simulation_error"))
    from ctsmid.nlp import _initial_point
    x0 = _initial_point(prob, ds, TRUTH1)
    sol = auglag_minimize(prob, x0)
    assert sol.feasible
    assert sol.violation <= 1e-6


# --- d* estimation -----------------------------------------------------------

def test_d_star_zero_for_true_model_generous_caps():
    ds = example1_dataset(N=30, eta_cap=2.0, actual_eta=False)
    d_star, witness = estimate_delta_bound(ds, [[2]], multistart=2, seed=1)
    assert d_star <= 1e-6
    assert witness.feasible


def test_d_star_positive_under_order_mismatch():
    # second-order data declared as first order with narrow noise caps
    ds = example1_dataset(N=30, eta_cap=0.01, actual_eta=False)
    d_star, witness = estimate_delta_bound(ds, [[1]], multistart=3, seed=2)
    assert d_star > 1e-3
    assert witness.feasible


def test_d_star_monotone_in_noise_caps():
    ds_narrow = example1_dataset(N=30, eta_cap=0.3, actual_eta=False)
    ds_wide = example1_dataset(N=30, eta_cap=0.6, actual_eta=False)
    d1, _ = estimate_delta_bound(ds_narrow, [[2]], multistart=2, seed=3)
    d2, _ = estimate_delta_bound(ds_wide, [[2]], multistart=2, seed=3)
    assert d2 <= d1 + 1e-6


# --- theta^E refinement -------------------------------------------------------

def test_refine_theta_e_truth_on_clean_data():
    ds = example1_dataset(N=25, eta_cap=2.0, actual_eta=False)
    # discretization error is nonzero on CT data, so allow the caps to cover it
    sol = refine_theta_e(ds, [[2]], DeltaBoundSpec(kind="uniform", d=0.0), TRUTH1)
    assert sol.feasible
    # simulation error at the refined point is at most the Tustin error floor
    t = tustin_map(EX1, ds.T_s)
    assert sol.objective <= 25 * np.max(np.abs(ds.y_tilde)) ** 2 * 0.05


def test_refine_theta_e_descent_from_perturbed_start():
    ds = example1_dataset(N=25, eta_cap=2.0, seed=4)
    theta0 = TRUTH1 * 1.2
    sol = refine_theta_e(ds, [[2]], DeltaBoundSpec(kind="uniform", d=0.0), theta0)
    assert sol.feasible
    # baseline: the feasible completion at the starting theta itself
    from ctsmid.nlp import fixed_theta_program as ftp
    qp, _ = ftp(ds, [[2]], theta0, DeltaBoundSpec(kind="uniform", d=0.0),
                objective="sim_error")
    base = solve(qp, tol=1e-9)
    assert sol.objective <= base.objective + 1e-6
