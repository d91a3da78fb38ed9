"""Excitation signals, bounded-noise datasets, and dataset file I/O.

Signals are closed-form evaluable objects (multisine or a sum of Gaussian
bumps), never interpolated sample tables, so the intersample behavior used by
the reference integrator is exactly defined.
"""

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import FitUndefinedError
from .lti import MimoModel, ct_simulate

__all__ = [
    "SignalSpec",
    "NoiseSpec",
    "Dataset",
    "DeltaBoundSpec",
    "generate_signal",
    "make_dataset",
    "delta_bounds",
    "metrics",
    "save_dataset",
    "load_dataset",
]

DELTA_KINDS = (
    "uniform",
    "relative_output",
    "relative_input",
    "relative_diff_output",
    "relative_diff_input",
)


@dataclass(frozen=True)
class SignalSpec:
    """Parameters of a closed-form excitation signal.

    ``multisine``:      u(t) = sum_k A_k cos(k dw t + phi_k),   k = 0..K
    ``gaussian_bumps``: u(t) = sum_k A_k exp(-b_k (t - t_k)^2), k = 0..K
    """

    kind: str
    amplitudes: tuple
    phases: tuple = ()
    delta_omega: float = 0.0
    widths: tuple = ()
    centers: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("multisine", "gaussian_bumps"):
            raise ValueError(f"unknown signal kind: {self.kind!r}")
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        if len(self.amplitudes) < 1:
            raise ValueError("at least one component (K >= 0) is required")
        if self.kind == "multisine":
            if len(self.phases) != len(self.amplitudes):
                raise ValueError("phases must match amplitudes in length")
            if not np.isfinite(self.delta_omega):
                raise ValueError("delta_omega must be finite")
        else:
            if len(self.widths) != len(self.amplitudes) or len(self.centers) != len(self.amplitudes):
                raise ValueError("widths and centers must match amplitudes in length")
            if any(w < 0 for w in self.widths):
                raise ValueError("widths must be nonnegative")
        if not all(np.isfinite(self.amplitudes)):
            raise ValueError("amplitudes must be finite")

    @staticmethod
    def random_multisine(K, delta_omega, seed):
        """Multisine with amplitudes and phases drawn standard-normal."""
        rng = np.random.default_rng(seed)
        return SignalSpec(
            kind="multisine",
            amplitudes=tuple(rng.standard_normal(K + 1)),
            phases=tuple(rng.standard_normal(K + 1)),
            delta_omega=float(delta_omega),
            seed=int(seed),
        )

    @staticmethod
    def random_gaussian_bumps(K, width_max, seed):
        """Gaussian-bump train centered at t_k = k, amplitudes standard-normal,
        widths uniform in [0, width_max]."""
        rng = np.random.default_rng(seed)
        return SignalSpec(
            kind="gaussian_bumps",
            amplitudes=tuple(rng.standard_normal(K + 1)),
            widths=tuple(rng.uniform(0.0, width_max, K + 1)),
            centers=tuple(float(k) for k in range(K + 1)),
            seed=int(seed),
        )

    def to_dict(self):
        return {
            "kind": self.kind,
            "amplitudes": list(self.amplitudes),
            "phases": list(self.phases),
            "delta_omega": self.delta_omega,
            "widths": list(self.widths),
            "centers": list(self.centers),
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d):
        return SignalSpec(
            kind=d["kind"],
            amplitudes=tuple(d["amplitudes"]),
            phases=tuple(d.get("phases", ())),
            delta_omega=float(d.get("delta_omega", 0.0)),
            widths=tuple(d.get("widths", ())),
            centers=tuple(d.get("centers", ())),
            seed=int(d.get("seed", 0)),
        )


def generate_signal(spec):
    """Closed-form evaluable signal u(t) for the given spec."""
    A = np.asarray(spec.amplitudes)
    if spec.kind == "multisine":
        k = np.arange(A.size)
        phi = np.asarray(spec.phases)
        dw = spec.delta_omega

        def u(t):
            return float(np.sum(A * np.cos(k * dw * t + phi)))
    else:
        b = np.asarray(spec.widths)
        c = np.asarray(spec.centers)

        def u(t):
            return float(np.sum(A * np.exp(-b * (t - c) ** 2)))

    return u


@dataclass(frozen=True)
class NoiseSpec:
    """Per-channel noise amplitude caps.

    ``kind`` is ``absolute`` (|noise| <= cap) or ``relative`` (|noise(k)| <=
    cap * |signal(k)|, with the bound evaluated on the noise-free signal).
    """

    eta_caps: tuple
    eps_caps: tuple
    eta_kind: str = "absolute"
    eps_kind: str = "absolute"

    def __post_init__(self):
        object.__setattr__(self, "eta_caps", tuple(float(c) for c in self.eta_caps))
        object.__setattr__(self, "eps_caps", tuple(float(c) for c in self.eps_caps))
        for kind in (self.eta_kind, self.eps_kind):
            if kind not in ("absolute", "relative"):
                raise ValueError(f"unknown noise kind: {kind!r}")
        if any(c < 0 for c in self.eta_caps + self.eps_caps):
            raise ValueError("noise caps must be nonnegative")

    def to_dict(self):
        return {
            "eta_caps": list(self.eta_caps),
            "eps_caps": list(self.eps_caps),
            "eta_kind": self.eta_kind,
            "eps_kind": self.eps_kind,
        }

    @staticmethod
    def from_dict(d):
        return NoiseSpec(
            eta_caps=tuple(d["eta_caps"]),
            eps_caps=tuple(d["eps_caps"]),
            eta_kind=d.get("eta_kind", "absolute"),
            eps_kind=d.get("eps_kind", "absolute"),
        )


@dataclass(frozen=True)
class Dataset:
    """Sampled noisy records with per-sample noise bounds.

    All matrices have one row per sample k = 1..N. The bound matrices bracket
    zero: ``eps_lo <= 0 <= eps_hi`` and ``eta_lo <= 0 <= eta_hi``. Ground
    truth (noise-free signals and the generating model) is retained for
    synthetic data.
    """

    T_s: float
    u_tilde: np.ndarray
    y_tilde: np.ndarray
    eps_lo: np.ndarray
    eps_hi: np.ndarray
    eta_lo: np.ndarray
    eta_hi: np.ndarray
    u_true: np.ndarray = None
    y_true: np.ndarray = None
    true_model: MimoModel = None
    signal_specs: tuple = None
    noise_spec: NoiseSpec = None

    def __post_init__(self):
        for name in ("u_tilde", "y_tilde", "eps_lo", "eps_hi", "eta_lo", "eta_hi"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        if not (self.T_s > 0):
            raise ValueError("T_s must be positive")
        N, n_u = self.u_tilde.shape
        n_y = self.y_tilde.shape[1]
        if self.y_tilde.shape[0] != N:
            raise ValueError("u_tilde and y_tilde must have the same number of rows")
        if self.eps_lo.shape != (N, n_u) or self.eps_hi.shape != (N, n_u):
            raise ValueError("input bound matrices must be N x n_u")
        if self.eta_lo.shape != (N, n_y) or self.eta_hi.shape != (N, n_y):
            raise ValueError("output bound matrices must be N x n_y")
        if np.any(self.eps_lo > 0) or np.any(self.eps_hi < 0) or np.any(self.eta_lo > 0) or np.any(self.eta_hi < 0):
            raise ValueError("noise bounds must bracket zero componentwise")
        if self.u_true is not None:
            object.__setattr__(self, "u_true", np.atleast_2d(np.asarray(self.u_true, dtype=float)))
            diff = self.u_true - self.u_tilde  # equals -epsilon
            if np.any(diff < -self.eps_hi - 1e-12) or np.any(diff > -self.eps_lo + 1e-12):
                raise ValueError("ground-truth input violates the declared noise bounds")
        if self.y_true is not None:
            object.__setattr__(self, "y_true", np.atleast_2d(np.asarray(self.y_true, dtype=float)))
            diff = self.y_true - self.y_tilde
            if np.any(diff < -self.eta_hi - 1e-12) or np.any(diff > -self.eta_lo + 1e-12):
                raise ValueError("ground-truth output violates the declared noise bounds")

    @property
    def N(self):
        return self.u_tilde.shape[0]

    @property
    def n_u(self):
        return self.u_tilde.shape[1]

    @property
    def n_y(self):
        return self.y_tilde.shape[1]

    def head(self, N):
        """First N samples as a new dataset (nested-record experiments)."""
        if not (1 <= N <= self.N):
            raise ValueError("N out of range")
        return replace(
            self,
            u_tilde=self.u_tilde[:N], y_tilde=self.y_tilde[:N],
            eps_lo=self.eps_lo[:N], eps_hi=self.eps_hi[:N],
            eta_lo=self.eta_lo[:N], eta_hi=self.eta_hi[:N],
            u_true=None if self.u_true is None else self.u_true[:N],
            y_true=None if self.y_true is None else self.y_true[:N],
        )


@dataclass(frozen=True)
class DeltaBoundSpec:
    """Shape of the discretization-error bound: Delta_delta(k) = d * phi_k."""

    kind: str
    d: float

    def __post_init__(self):
        if self.kind not in DELTA_KINDS:
            raise ValueError(f"unknown delta bound kind: {self.kind!r}")
        if not (self.d >= 0):
            raise ValueError("d must be nonnegative")

    def to_dict(self):
        return {"kind": self.kind, "d": self.d}

    @staticmethod
    def from_dict(d):
        return DeltaBoundSpec(kind=d["kind"], d=float(d["d"]))


def delta_phi(kind, dataset):
    """The data-dependent factors phi_k as an N x n_y nonnegative matrix.

    Input-based kinds aggregate over input channels by summation and broadcast
    over outputs. The relative-difference kinds fall back to the plain
    relative value at the first sample.
    """
    y = np.abs(dataset.y_tilde)
    u_sum = np.abs(dataset.u_tilde).sum(axis=1, keepdims=True)
    N, n_y = dataset.y_tilde.shape
    if kind == "uniform":
        return np.ones((N, n_y))
    if kind == "relative_output":
        return y
    if kind == "relative_input":
        return np.broadcast_to(u_sum, (N, n_y)).copy()
    if kind == "relative_diff_output":
        out = np.empty((N, n_y))
        out[0] = y[0]
        out[1:] = np.abs(dataset.y_tilde[1:] - dataset.y_tilde[:-1])
        return out
    if kind == "relative_diff_input":
        du = np.empty((N, 1))
        du[0] = u_sum[0]
        du[1:] = np.abs(dataset.u_tilde[1:] - dataset.u_tilde[:-1]).sum(axis=1, keepdims=True)
        return np.broadcast_to(du, (N, n_y)).copy()
    raise ValueError(f"unknown delta bound kind: {kind!r}")


def delta_bounds(spec, dataset):
    """Evaluate Delta_delta(k) = d * phi_k for every sample and output."""
    return spec.d * delta_phi(spec.kind, dataset)


def make_dataset(model, signal_specs, T_s, N, noise_spec, seed, substeps=100,
                 warmup=0.0):
    """Generate a synthetic bounded-noise dataset from a CT model.

    Each SISO channel is simulated separately by the reference integrator and
    the outputs are superposed; noise is drawn uniformly within the declared
    caps. The true signals and the generating model are stored as ground
    truth.  ``warmup`` seconds of pre-roll are simulated and discarded before
    the first retained sample, so the record can start in (approximate)
    steady state instead of at rest.
    """
    if isinstance(signal_specs, SignalSpec):
        signal_specs = (signal_specs,)
    signal_specs = tuple(signal_specs)
    if len(signal_specs) != model.n_u:
        raise ValueError("one signal spec per input is required")
    if len(noise_spec.eta_caps) != model.n_y or len(noise_spec.eps_caps) != model.n_u:
        raise ValueError("noise caps inconsistent with model dimensions")
    if warmup < 0:
        raise ValueError("warmup must be nonnegative")

    W = int(np.ceil(warmup / T_s - 1e-12)) if warmup > 0 else 0
    t_samples = np.arange(W + 1, W + N + 1) * T_s
    signals = [generate_signal(s) for s in signal_specs]
    u_true = np.column_stack([[sig(t) for t in t_samples] for sig in signals])
    y_true = np.zeros((N, model.n_y))
    for m in range(model.n_y):
        for l in range(model.n_u):
            y_full = ct_simulate(model.channels[m][l], signals[l], T_s, N + W,
                                 substeps=substeps)
            y_true[:, m] += y_full[W:]

    rng = np.random.default_rng(seed)

    def caps_matrix(kind, caps, ref):
        caps = np.asarray(caps)
        if kind == "absolute":
            return np.broadcast_to(caps, ref.shape).astype(float).copy()
        return np.abs(ref) * caps

    eps_hi = caps_matrix(noise_spec.eps_kind, noise_spec.eps_caps, u_true)
    eta_hi = caps_matrix(noise_spec.eta_kind, noise_spec.eta_caps, y_true)
    eps = rng.uniform(-1.0, 1.0, size=eps_hi.shape) * eps_hi
    eta = rng.uniform(-1.0, 1.0, size=eta_hi.shape) * eta_hi

    return Dataset(
        T_s=T_s,
        u_tilde=u_true + eps,
        y_tilde=y_true + eta,
        eps_lo=-eps_hi, eps_hi=eps_hi,
        eta_lo=-eta_hi, eta_hi=eta_hi,
        u_true=u_true, y_true=y_true,
        true_model=model,
        signal_specs=signal_specs,
        noise_spec=noise_spec,
    )


def metrics(y_hat, y_tilde):
    """(MSE, FIT) of a simulated output against a reference record."""
    y_hat = np.asarray(y_hat, dtype=float)
    y_tilde = np.asarray(y_tilde, dtype=float)
    if y_hat.shape != y_tilde.shape or y_hat.ndim != 1 or y_hat.size < 2:
        raise ValueError("y_hat and y_tilde must be equal-length sequences with N >= 2")
    err = y_hat - y_tilde
    mse = float(np.mean(err ** 2))
    spread = float(np.sum((y_tilde - y_tilde.mean()) ** 2))
    if spread == 0.0:
        raise FitUndefinedError("FIT undefined for a constant reference output")
    fit = 1.0 - float(np.sqrt(np.sum(err ** 2) / spread))
    return mse, fit


# ---------------------------------------------------------------------------
# File I/O
#
# CSV layout: header  k,u_1..u_{n_u},y_1..y_{n_y},eps_lo_1..,eps_hi_1..,
# eta_lo_1..,eta_hi_1..  with one row per sample. A companion JSON record
# holds T_s, dimensions, specs, and (for synthetic data) the ground truth.

def _fmt(x):
    return repr(float(x))


def _model_to_dict(model):
    return {
        "orders": model.orders().tolist(),
        "theta": model.theta().tolist(),
    }


def _model_from_dict(d):
    return MimoModel.from_theta(np.asarray(d["theta"]), np.asarray(d["orders"]))


def save_dataset(dataset, csv_path, meta_path=None):
    """Write the dataset CSV and its companion metadata JSON."""
    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".json")
    n_u, n_y = dataset.n_u, dataset.n_y
    header = (
        ["k"]
        + [f"u_{l + 1}" for l in range(n_u)]
        + [f"y_{m + 1}" for m in range(n_y)]
        + [f"eps_lo_{l + 1}" for l in range(n_u)]
        + [f"eps_hi_{l + 1}" for l in range(n_u)]
        + [f"eta_lo_{m + 1}" for m in range(n_y)]
        + [f"eta_hi_{m + 1}" for m in range(n_y)]
    )
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(dataset.N):
            row = [str(k + 1)]
            row += [_fmt(v) for v in dataset.u_tilde[k]]
            row += [_fmt(v) for v in dataset.y_tilde[k]]
            row += [_fmt(v) for v in dataset.eps_lo[k]]
            row += [_fmt(v) for v in dataset.eps_hi[k]]
            row += [_fmt(v) for v in dataset.eta_lo[k]]
            row += [_fmt(v) for v in dataset.eta_hi[k]]
            writer.writerow(row)

    meta = {"T_s": dataset.T_s, "N": dataset.N, "n_u": n_u, "n_y": n_y}
    if dataset.true_model is not None:
        meta["true_model"] = _model_to_dict(dataset.true_model)
    if dataset.u_true is not None:
        meta["u_true"] = dataset.u_true.tolist()
    if dataset.y_true is not None:
        meta["y_true"] = dataset.y_true.tolist()
    if dataset.signal_specs is not None:
        meta["signal_specs"] = [s.to_dict() for s in dataset.signal_specs]
    if dataset.noise_spec is not None:
        meta["noise_spec"] = dataset.noise_spec.to_dict()
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=1)
    return csv_path, meta_path


def load_dataset(csv_path, meta_path=None):
    """Read a dataset written by :func:`save_dataset`."""
    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".json")
    with open(meta_path) as fh:
        meta = json.load(fh)
    n_u, n_y = int(meta["n_u"]), int(meta["n_y"])
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        rows = [[float(v) for v in row[1:]] for row in reader]
    data = np.asarray(rows)
    cols = np.cumsum([n_u, n_y, n_u, n_u, n_y, n_y])
    u_tilde, y_tilde, eps_lo, eps_hi, eta_lo, eta_hi = np.hsplit(data, cols[:-1])
    return Dataset(
        T_s=float(meta["T_s"]),
        u_tilde=u_tilde, y_tilde=y_tilde,
        eps_lo=eps_lo, eps_hi=eps_hi,
        eta_lo=eta_lo, eta_hi=eta_hi,
        u_true=np.asarray(meta["u_true"]) if "u_true" in meta else None,
        y_true=np.asarray(meta["y_true"]) if "y_true" in meta else None,
        true_model=_model_from_dict(meta["true_model"]) if "true_model" in meta else None,
        signal_specs=tuple(SignalSpec.from_dict(s) for s in meta["signal_specs"]) if "signal_specs" in meta else None,
        noise_spec=NoiseSpec.from_dict(meta["noise_spec"]) if "noise_spec" in meta else None,
    )
