"""Continuous- and discrete-time LTI transfer-function models and the exact
bilinear (Tustin) coefficient mapping between them.

A continuous-time channel is the strictly proper rational function

    H(s) = (beta_{n-1} s^{n-1} + ... + beta_0) / (s^n + alpha_{n-1} s^{n-1} + ... + alpha_0)

and its Tustin image under s = (2/T_s)(z-1)/(z+1) is the discrete-time model

    T(z) = (xi_n z^n + ... + xi_0) / (z^n + gamma_{n-1} z^{n-1} + ... + gamma_0).

The map is computed in closed form through the integer coefficients of the
expansion of (z-1)^i (z+1)^(n-i), so it is exact up to floating-point rounding.
"""

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import DegenerateMapError

__all__ = [
    "ContinuousTf",
    "MimoModel",
    "DiscreteTf",
    "tustin_c_coeff",
    "tustin_affine_forms",
    "tustin_map",
    "dt_simulate",
    "ct_simulate",
    "discretization_error",
    "an_tolerance",
]


@dataclass(frozen=True)
class ContinuousTf:
    """Strictly proper SISO CT transfer function with monic denominator.

    ``alpha`` holds the denominator coefficients alpha_0..alpha_{n-1} (low to
    high); ``beta`` the numerator coefficients beta_0..beta_{n-1}.
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if alpha.ndim != 1 or beta.ndim != 1 or alpha.size != beta.size:
            raise ValueError("alpha and beta must be 1-d arrays of equal length")
        if alpha.size < 1:
            raise ValueError("order must be at least 1")
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def order(self):
        return self.alpha.size

    def poles(self):
        """Denominator roots (companion-matrix eigenvalues)."""
        return np.roots(np.concatenate(([1.0], self.alpha[::-1])))

    def is_stable(self, margin=0.0):
        return bool(np.all(self.poles().real < -margin))

    def dc_gain(self):
        if self.alpha[0] == 0.0:
            raise ZeroDivisionError("dc gain undefined: alpha_0 = 0")
        return self.beta[0] / self.alpha[0]

    @staticmethod
    def from_poles(poles, dc_gain):
        """Build a no-zero transfer function with the given poles and DC gain."""
        den = np.real(np.poly(np.asarray(poles, dtype=complex)))
        alpha = den[1:][::-1]
        beta = np.zeros_like(alpha)
        beta[0] = dc_gain * alpha[0]
        return ContinuousTf(alpha=alpha, beta=beta)


@dataclass(frozen=True)
class MimoModel:
    """Grid of CT channels: ``channels[m][l]`` maps input l to output m."""

    channels: tuple

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.channels)
        if not rows or not rows[0]:
            raise ValueError("channel grid must be non-empty")
        width = len(rows[0])
        for row in rows:
            if len(row) != width:
                raise ValueError("channel grid rows must have equal length")
            for h in row:
                if not isinstance(h, ContinuousTf):
                    raise TypeError("channel entries must be ContinuousTf")
        object.__setattr__(self, "channels", rows)

    @property
    def n_y(self):
        return len(self.channels)

    @property
    def n_u(self):
        return len(self.channels[0])

    def orders(self):
        return np.array([[h.order for h in row] for row in self.channels], dtype=int)

    def n_theta(self):
        return int(2 * self.orders().sum())

    def theta(self):
        """Stacked parameter vector: channels in (m, l) row-major order,
        alpha block before beta block within each channel."""
        parts = []
        for row in self.channels:
            for h in row:
                parts.append(h.alpha)
                parts.append(h.beta)
        return np.concatenate(parts)

    @staticmethod
    def siso(h):
        return MimoModel(channels=((h,),))

    @staticmethod
    def from_theta(theta, orders):
        orders = np.atleast_2d(np.asarray(orders, dtype=int))
        theta = np.asarray(theta, dtype=float)
        rows, pos = [], 0
        for m in range(orders.shape[0]):
            row = []
            for l in range(orders.shape[1]):
                n = int(orders[m, l])
                row.append(ContinuousTf(alpha=theta[pos:pos + n], beta=theta[pos + n:pos + 2 * n]))
                pos += 2 * n
            rows.append(tuple(row))
        if pos != theta.size:
            raise ValueError("theta length inconsistent with orders")
        return MimoModel(channels=tuple(rows))


@dataclass(frozen=True)
class DiscreteTf:
    """DT transfer function of order n produced by the Tustin map.

    ``gamma`` holds gamma_0..gamma_{n-1} and ``xi`` holds xi_0..xi_n, both low
    to high in powers of z; the denominator leading coefficient is 1.
    """

    gamma: np.ndarray
    xi: np.ndarray
    T_s: float

    def __post_init__(self):
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if xi.size != gamma.size + 1:
            raise ValueError("xi must have one more entry than gamma")
        if not (np.all(np.isfinite(gamma)) and np.all(np.isfinite(xi))):
            raise ValueError("coefficients must be finite")
        if not (self.T_s > 0):
            raise ValueError("T_s must be positive")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "xi", xi)

    @property
    def order(self):
        return self.gamma.size

    def poles(self):
        return np.roots(np.concatenate(([1.0], self.gamma[::-1])))

    def dc_gain(self):
        return self.xi.sum() / (1.0 + self.gamma.sum())


def tustin_c_coeff(n, i, j):
    """Coefficient of z^j in (z-1)^i (z+1)^(n-i), as an exact integer."""
    if not (0 <= i <= n and 0 <= j <= n):
        raise ValueError(f"indices out of range: n={n}, i={i}, j={j}")
    return sum(comb(i, k) * (-1) ** (i - k) * comb(n - i, j - k)
               for k in range(max(0, j - (n - i)), min(i, j) + 1))


def tustin_affine_forms(n, T_s):
    """Affine forms of the unnormalized DT coefficients.

    Returns ``(a_const, weight)`` with ``a_const[j] = 2^n c_j^(n)`` and
    ``weight[j, i] = 2^i T_s^(n-i) c_j^(i)`` so that, for coefficient vectors
    alpha and beta of length n,

        a_j(alpha) = a_const[j] + weight[j] @ alpha     (j = 0..n)
        b_j(beta)  = weight[j] @ beta                   (j = 0..n)

    are the denominator and numerator coefficients of z^j before the
    normalization by a_n(alpha).
    """
    a_const = np.array([2.0 ** n * tustin_c_coeff(n, n, j) for j in range(n + 1)])
    weight = np.array([[2.0 ** i * T_s ** (n - i) * tustin_c_coeff(n, i, j)
                        for i in range(n)] for j in range(n + 1)])
    return a_const, weight


def an_tolerance(n):
    """Degeneracy threshold for |a_n(alpha)|."""
    return 1e-12 * max(1.0, 2.0 ** n)


def tustin_map(h, T_s):
    """Map a CT transfer function to its exact Tustin DT image."""
    n = h.order
    a_const, weight = tustin_affine_forms(n, T_s)
    a = a_const + weight @ h.alpha
    b = weight @ h.beta
    a_n = a[n]
    if abs(a_n) <= an_tolerance(n):
        raise DegenerateMapError(f"a_n(alpha) = {a_n:.3e} is numerically zero")
    return DiscreteTf(gamma=a[:n] / a_n, xi=b / a_n, T_s=T_s)


def dt_simulate(t, u, z_init):
    """Run the DT recursion of ``t`` over the input samples ``u``.

    ``z_init`` supplies the first n output samples; the recursion

        tau(k) = sum_j xi_j u(k-n+j) - sum_j gamma_j tau(k-n+j)

    is applied for k = n+1..N (1-based sample indices).
    """
    u = np.asarray(u, dtype=float)
    z_init = np.atleast_1d(np.asarray(z_init, dtype=float))
    n = t.order
    if u.ndim != 1 or u.size < n:
        raise ValueError("u must be a 1-d sequence with at least n samples")
    if z_init.size != n:
        raise ValueError(f"z_init must have length {n}")
    N = u.size
    tau = np.empty(N)
    tau[:n] = z_init
    for k in range(n, N):  # 0-based index of tau(k+1)
        acc = t.xi @ u[k - n:k + 1]
        acc -= t.gamma @ tau[k - n:k]
        tau[k] = acc
    return tau


def _canonical_state_space(h):
    """Controllable canonical realization (A, B, C) of a strictly proper channel."""
    n = h.order
    A = np.zeros((n, n))
    if n > 1:
        A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -h.alpha
    B = np.zeros(n)
    B[-1] = 1.0
    C = h.beta.copy()
    return A, B, C


def ct_simulate(h, u, T_s, N, substeps=100):
    """Sample the CT response y(k T_s), k = 1..N, by fixed-step RK4 integration.

    ``u`` is a callable evaluable at arbitrary times (closed-form signal), so
    the intersample behavior is exactly defined. The state starts at zero and
    the integrator takes ``substeps`` steps per sample period.
    """
    if substeps < 10:
        raise ValueError("substeps must be at least 10")
    if N < 1:
        raise ValueError("N must be positive")
    A, B, C = _canonical_state_space(h)
    dt = T_s / substeps
    x = np.zeros(h.order)
    y = np.empty(N)
    t = 0.0
    for k in range(N):
        for _ in range(substeps):
            k1 = A @ x + B * u(t)
            k2 = A @ (x + 0.5 * dt * k1) + B * u(t + 0.5 * dt)
            k3 = A @ (x + 0.5 * dt * k2) + B * u(t + 0.5 * dt)
            k4 = A @ (x + dt * k3) + B * u(t + dt)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += dt
        t = (k + 1) * T_s  # avoid drift in the time accumulator
        y[k] = C @ x
    return y


def discretization_error(h, u, T_s, N, substeps=100):
    """delta(k) = y(k) - tau(k): sampled CT output minus Tustin DT output.

    The DT recursion is initialized with the first n samples of the CT output,
    so the reported error reflects the recursion range k = n+1..N.
    """
    y = ct_simulate(h, u, T_s, N, substeps=substeps)
    t = tustin_map(h, T_s)
    u_samples = np.array([u(k * T_s) for k in range(1, N + 1)])
    tau = dt_simulate(t, u_samples, z_init=y[:h.order])
    return y - tau
