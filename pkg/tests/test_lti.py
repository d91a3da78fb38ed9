import numpy as np
import pytest

from ctsmid.errors import DegenerateMapError
from ctsmid.lti import (
    ContinuousTf,
    DiscreteTf,
    MimoModel,
    ct_simulate,
    discretization_error,
    dt_simulate,
    tustin_c_coeff,
    tustin_map,
)
from ctsmid.signals import SignalSpec, generate_signal


# --- independent oracles ----------------------------------------------------

def c_coeff_oracle(n, i):
    """Coefficients of (z-1)^i (z+1)^(n-i) by repeated convolution."""
    poly = np.array([1.0])
    for _ in range(i):
        poly = np.convolve(poly, [-1.0, 1.0])
    for _ in range(n - i):
        poly = np.convolve(poly, [1.0, 1.0])
    return poly  # index j -> coefficient of z^j


def tustin_oracle(h, T_s):
    """Tustin image by direct substitution s = (2/T_s)(z-1)/(z+1) and
    clearing of denominators, using polynomial convolution only."""
    n = h.order
    num = np.zeros(n + 1)
    den = np.zeros(n + 1)
    for i in range(n):
        basis = (2.0 / T_s) ** i * c_coeff_oracle(n, i)
        num += h.beta[i] * basis
        den += h.alpha[i] * basis
    den += (2.0 / T_s) ** n * c_coeff_oracle(n, n)
    lead = den[n]
    return den[:n] / lead, num / lead  # gamma, xi


def impulse_response(t, length):
    """Impulse response of T(z) by long division in powers of z^-1."""
    n = t.order
    xi_rev = t.xi[::-1]      # xi_rev[d] = xi_{n-d}
    gam_rev = t.gamma[::-1]  # gam_rev[d-1] = gamma_{n-d}
    h = np.zeros(length)
    for k in range(length):
        acc = xi_rev[k] if k <= n else 0.0
        for d in range(1, min(k, n) + 1):
            acc -= gam_rev[d - 1] * h[k - d]
        h[k] = acc
    return h


def random_stable_tf(rng, order):
    poles = []
    remaining = order
    while remaining > 0:
        if remaining >= 2 and rng.random() < 0.5:
            re, im = -rng.uniform(0.2, 3.0), rng.uniform(0.1, 5.0)
            poles += [complex(re, im), complex(re, -im)]
            remaining -= 2
        else:
            poles.append(complex(-rng.uniform(0.2, 3.0), 0.0))
            remaining -= 1
    den = np.real(np.poly(poles))
    alpha = den[1:][::-1]
    beta = rng.standard_normal(order)
    return ContinuousTf(alpha=alpha, beta=beta)


# --- tustin_c_coeff ---------------------------------------------------------

@pytest.mark.parametrize("n,i,j,expected", [
    (2, 1, 0, -1),
    (2, 1, 1, 0),
    (1, 0, 1, 1),
    (4, 2, 2, -2),
])
def test_c_coeff_examples(n, i, j, expected):
    assert tustin_c_coeff(n, i, j) == expected


def test_c_coeff_matches_convolution_exactly():
    for n in range(1, 13):
        for i in range(n + 1):
            poly = c_coeff_oracle(n, i)
            for j in range(n + 1):
                assert tustin_c_coeff(n, i, j) == int(round(poly[j]))


def test_c_coeff_out_of_range():
    with pytest.raises(ValueError):
        tustin_c_coeff(2, 3, 0)
    with pytest.raises(ValueError):
        tustin_c_coeff(2, 0, 3)


# --- tustin_map -------------------------------------------------------------

def test_tustin_first_order_hand_example():
    t = tustin_map(ContinuousTf(alpha=[1.0], beta=[1.0]), T_s=2.0)
    np.testing.assert_allclose(t.xi, [0.5, 0.5], atol=1e-14)
    np.testing.assert_allclose(t.gamma, [0.0], atol=1e-14)


def test_tustin_second_order_against_oracle():
    h = ContinuousTf(alpha=[16.3, 2.2], beta=[-21.0, 10.5])
    t = tustin_map(h, 0.05)
    gamma, xi = tustin_oracle(h, 0.05)
    np.testing.assert_allclose(t.gamma, gamma, rtol=1e-10)
    np.testing.assert_allclose(t.xi, xi, rtol=1e-10)


def test_tustin_preserves_dc_gain():
    h = ContinuousTf(alpha=[3.7], beta=[3.7])
    t = tustin_map(h, 0.3)
    assert t.dc_gain() == pytest.approx(1.0, rel=1e-12)


def test_tustin_random_systems_match_oracle():
    rng = np.random.default_rng(7)
    for _ in range(60):
        order = rng.integers(1, 6)
        h = random_stable_tf(rng, order)
        T_s = 10.0 ** rng.uniform(-3, 0)
        t = tustin_map(h, T_s)
        gamma, xi = tustin_oracle(h, T_s)
        np.testing.assert_allclose(t.gamma, gamma, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(t.xi, xi, rtol=1e-10, atol=1e-12)


def test_tustin_dc_gain_identity_random():
    # The identity holds exactly in real arithmetic. In double precision the
    # summed DT coefficients cancel, so the check uses a well-sampled family
    # (T_s comparable to the time constants) where rounding stays below 1e-9.
    rng = np.random.default_rng(8)
    for _ in range(60):
        h = random_stable_tf(rng, int(rng.integers(1, 6)))
        t = tustin_map(h, 10.0 ** rng.uniform(-1, 0))
        assert t.dc_gain() == pytest.approx(h.dc_gain(), rel=1e-9)


def test_tustin_preserves_stability():
    rng = np.random.default_rng(9)
    for _ in range(30):
        h = random_stable_tf(rng, int(rng.integers(1, 6)))
        assert h.is_stable()
        t = tustin_map(h, 10.0 ** rng.uniform(-3, 0.5))
        assert np.all(np.abs(t.poles()) < 1.0)


def test_tustin_degenerate_map():
    # alpha_0 = -(2/T_s) puts a CT pole exactly at the Tustin singularity.
    with pytest.raises(DegenerateMapError):
        tustin_map(ContinuousTf(alpha=[-2.0], beta=[1.0]), T_s=1.0)


# --- dt_simulate ------------------------------------------------------------

def test_dt_identity_recursion():
    t = DiscreteTf(gamma=[0.0], xi=[0.0, 1.0], T_s=1.0)
    u = np.array([3.0, -1.0, 2.0, 0.5])
    tau = dt_simulate(t, u, z_init=[7.0])
    np.testing.assert_allclose(tau[1:], u[1:])
    assert tau[0] == 7.0


def test_dt_dc_steady_state():
    t = tustin_map(ContinuousTf(alpha=[1.0], beta=[1.0]), T_s=2.0)
    tau = dt_simulate(t, np.ones(20), z_init=[1.0])
    np.testing.assert_allclose(tau, 1.0, atol=1e-12)


def test_dt_simulate_matches_impulse_convolution():
    h = ContinuousTf(alpha=[16.3, 2.2], beta=[-21.0, 10.5])
    t = tustin_map(h, 0.05)
    n = t.order
    spec = SignalSpec.random_multisine(20, 0.2, seed=3)
    sig = generate_signal(spec)
    u_core = np.array([sig(k * 0.05) for k in range(1, 61)])
    u = np.concatenate([np.zeros(n), u_core])  # leading zeros align the two paths
    tau = dt_simulate(t, u, z_init=np.zeros(n))
    h_imp = impulse_response(t, u.size)
    tau_conv = np.convolve(h_imp, u)[:u.size]
    np.testing.assert_allclose(tau, tau_conv, atol=1e-9)


def test_dt_simulate_length_errors():
    t = DiscreteTf(gamma=[0.0, 0.0], xi=[0.0, 0.0, 1.0], T_s=1.0)
    with pytest.raises(ValueError):
        dt_simulate(t, [1.0], z_init=[0.0, 0.0])
    with pytest.raises(ValueError):
        dt_simulate(t, [1.0, 2.0, 3.0], z_init=[0.0])


# --- ct_simulate ------------------------------------------------------------

def test_ct_step_response_first_order():
    h = ContinuousTf(alpha=[1.0], beta=[1.0])
    y = ct_simulate(h, lambda t: 1.0, 0.1, 60, substeps=100)
    expected = 1.0 - np.exp(-0.1 * np.arange(1, 61))
    np.testing.assert_allclose(y, expected, atol=1e-8)


def test_ct_zero_input():
    h = ContinuousTf(alpha=[100.0, 20.0, 8.0], beta=[103.0, 36.0, 11.0])
    y = ct_simulate(h, lambda t: 0.0, 0.05, 40)
    np.testing.assert_allclose(y, 0.0)


def test_ct_substep_convergence():
    h = ContinuousTf(alpha=[100.0, 20.0, 8.0], beta=[103.0, 36.0, 11.0])
    sig = generate_signal(SignalSpec.random_multisine(30, 0.1, seed=4))
    y1 = ct_simulate(h, sig, 0.03, 60, substeps=100)
    y2 = ct_simulate(h, sig, 0.03, 60, substeps=200)
    assert np.max(np.abs(y1 - y2)) < 1e-9


def test_ct_substeps_validation():
    with pytest.raises(ValueError):
        ct_simulate(ContinuousTf(alpha=[1.0], beta=[1.0]), lambda t: 0.0, 0.1, 10, substeps=5)


# --- discretization error ---------------------------------------------------

def test_delta_zero_input():
    h = ContinuousTf(alpha=[16.3, 2.2], beta=[-21.0, 10.5])
    delta = discretization_error(h, lambda t: 0.0, 0.05, 30)
    np.testing.assert_allclose(delta, 0.0, atol=1e-12)


def test_delta_bounded():
    h = ContinuousTf(alpha=[16.3, 2.2], beta=[-21.0, 10.5])
    sig = generate_signal(SignalSpec.random_multisine(50, 0.1, seed=5))
    delta = discretization_error(h, sig, 0.05, 80)
    assert np.all(np.isfinite(delta))
    assert np.max(np.abs(delta)) < 1.0


def test_delta_second_order_accuracy():
    h = ContinuousTf(alpha=[100.0, 20.0, 8.0], beta=[103.0, 36.0, 11.0])
    sig = generate_signal(SignalSpec.random_multisine(40, 0.1, seed=6))
    d_coarse = discretization_error(h, sig, 0.04, 150)
    d_fine = discretization_error(h, sig, 0.02, 300)
    ratio = np.max(np.abs(d_coarse)) / np.max(np.abs(d_fine))
    assert 3.0 <= ratio <= 5.0


# --- model containers -------------------------------------------------------

def test_mimo_theta_round_trip():
    model = MimoModel(channels=(
        (ContinuousTf(alpha=[4420.8, 13.297], beta=[4420.8, 0.0]),
         ContinuousTf(alpha=[10.0], beta=[-10.0])),
    ))
    theta = model.theta()
    rebuilt = MimoModel.from_theta(theta, model.orders())
    np.testing.assert_array_equal(rebuilt.theta(), theta)
    assert model.n_theta() == theta.size == 6
