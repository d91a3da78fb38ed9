"""Lifted polynomial program for set-membership CT identification.

The decision vector collects, in order: the CT parameters (alpha, beta per
channel), the DT parameters (gamma, xi per channel), the partial outputs
z_{m,l}(k), and the noise-free inputs u_l(k). Constraints are the bilinear DT
recursions, the bilinear CT-to-DT coupling equations, and the affine noise /
discretization-error band inequalities, plus optional a-priori constraints.

The variable cliques of the correlative-sparsity decomposition are the
parameter block plus a family of sliding sample windows; the decomposition is
audited against the six structural conditions (CS1-CS6) every time it is
built.

Monomials are dict keys of the form ``((var, pow), ...)`` sorted by variable
index; the empty tuple is the constant monomial.
"""

import json
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import CliqueAuditError
from .lti import tustin_affine_forms
from .signals import delta_bounds, delta_phi

__all__ = [
    "Polynomial",
    "VarIndex",
    "PopConstraint",
    "ObjectiveSpec",
    "PriorSpec",
    "Clique",
    "PopProblem",
    "build_pop",
    "build_cliques",
    "audit_cliques",
    "term_sparsity_supports",
    "mono_mul",
    "mono_degree",
    "monomials_upto",
]

DEFAULT_THETA_BOX = 1e3


# --- monomial utilities -----------------------------------------------------

def mono_mul(*keys):
    """Product of monomial keys."""
    powers = {}
    for key in keys:
        for var, p in key:
            powers[var] = powers.get(var, 0) + p
    return tuple(sorted(powers.items()))


def mono_degree(key):
    return sum(p for _, p in key)


def mono_vars(key):
    return tuple(var for var, _ in key)


def monomials_upto(variables, degree):
    """All monomials over ``variables`` with total degree <= ``degree``, in
    graded lexicographic order (constant first); deterministic."""
    variables = sorted(variables)
    basis = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(variables, d):
            powers = {}
            for var in combo:
                powers[var] = powers.get(var, 0) + 1
            basis.append(tuple(sorted(powers.items())))
    return basis


@dataclass(frozen=True)
class Polynomial:
    """Sparse multivariate polynomial: monomial key -> coefficient."""

    terms: tuple  # tuple of (key, coeff), keys unique, coeffs nonzero

    @staticmethod
    def from_dict(d):
        items = tuple(sorted((k, float(c)) for k, c in d.items() if c != 0.0))
        return Polynomial(terms=items)

    def coeff_dict(self):
        return dict(self.terms)

    def degree(self):
        return max((mono_degree(k) for k, _ in self.terms), default=0)

    def support_vars(self):
        out = set()
        for key, _ in self.terms:
            out.update(mono_vars(key))
        return out

    def supports(self):
        return [key for key, _ in self.terms]

    def __call__(self, x):
        x = np.asarray(x)
        total = 0.0
        for key, coeff in self.terms:
            val = coeff
            for var, p in key:
                val *= x[var] ** p
            total += val
        return total


class _PolyBuilder(dict):
    def add(self, key, coeff):
        if coeff != 0.0:
            self[key] = self.get(key, 0.0) + coeff

    def done(self):
        return Polynomial.from_dict(self)


# --- variable catalog -------------------------------------------------------

@dataclass(frozen=True)
class VarIndex:
    """Dense index catalog for the decision vector.

    Blocks appear in the fixed order theta, psi, z (one block of N samples per
    channel, channels in (m, l) row-major order), u (one block per input), and
    optionally a trailing discretization-scale variable d.
    """

    orders: np.ndarray
    N: int
    free_delta: bool = False

    def __post_init__(self):
        object.__setattr__(self, "orders", np.atleast_2d(np.asarray(self.orders, dtype=int)))
        if np.any(self.orders < 1):
            raise ValueError("channel orders must be positive")
        if self.N < int(self.orders.max()):
            raise ValueError("N must be at least the largest channel order")

    @property
    def n_y(self):
        return self.orders.shape[0]

    @property
    def n_u(self):
        return self.orders.shape[1]

    @property
    def n_bar(self):
        return int(self.orders.max())

    @property
    def n_theta(self):
        return int(2 * self.orders.sum())

    @property
    def n_psi(self):
        return int((2 * self.orders + 1).sum())

    @property
    def n_vars(self):
        return self.n_theta + self.n_psi + (self.n_y + 1) * self.n_u * self.N + int(self.free_delta)

    def _channel_offset(self, block_sizes, m, l):
        flat = [block_sizes(int(n)) for n in self.orders.ravel()]
        idx = m * self.n_u + l
        return sum(flat[:idx])

    def order_of(self, m, l):
        return int(self.orders[m, l])

    def alpha_idx(self, m, l):
        off = self._channel_offset(lambda n: 2 * n, m, l)
        return np.arange(off, off + self.order_of(m, l))

    def beta_idx(self, m, l):
        return self.alpha_idx(m, l) + self.order_of(m, l)

    def gamma_idx(self, m, l):
        off = self.n_theta + self._channel_offset(lambda n: 2 * n + 1, m, l)
        return np.arange(off, off + self.order_of(m, l))

    def xi_idx(self, m, l):
        n = self.order_of(m, l)
        g0 = int(self.gamma_idx(m, l)[0])
        return np.arange(g0 + n, g0 + 2 * n + 1)

    def z_block(self, m, l):
        base = self.n_theta + self.n_psi
        return base + (m * self.n_u + l) * self.N

    def z_idx(self, m, l, k):
        """Index of z_{m,l}(k), k 1-based."""
        return self.z_block(m, l) + k - 1

    def u_block(self, l):
        return self.n_theta + self.n_psi + self.n_y * self.n_u * self.N + l * self.N

    def u_idx(self, l, k):
        return self.u_block(l) + k - 1

    @property
    def delta_idx(self):
        if not self.free_delta:
            raise ValueError("no free delta variable in this catalog")
        return self.n_vars - 1

    def theta_name(self, i):
        pos = 0
        for m in range(self.n_y):
            for l in range(self.n_u):
                n = self.order_of(m, l)
                if i < pos + 2 * n:
                    j = i - pos
                    sym = ("alpha", j) if j < n else ("beta", j - n)
                    tag = f"^({m + 1},{l + 1})" if self.n_y * self.n_u > 1 else ""
                    return f"{sym[0]}_{sym[1]}{tag}"
                pos += 2 * n
        raise IndexError(i)


# --- constraints and problem ------------------------------------------------

@dataclass(frozen=True)
class PopConstraint:
    """One polynomial constraint: ``poly == 0`` if equality else ``poly >= 0``."""

    poly: Polynomial
    equality: bool
    kind: str
    meta: tuple = ()


@dataclass(frozen=True)
class ObjectiveSpec:
    """Objective selector: a signed parameter coordinate (PUI end-points), the
    quadratic simulation error, or the discretization scale d."""

    kind: str = "coordinate"
    index: int = 0
    sign: float = 1.0

    def __post_init__(self):
        if self.kind not in ("coordinate", "simulation_error", "delta_scale"):
            raise ValueError(f"unknown objective kind: {self.kind!r}")


@dataclass(frozen=True)
class PriorSpec:
    """A-priori information constraints.

    ``theta_lo``/``theta_hi`` are per-coordinate box bounds (required for the
    Archimedean normalization; defaults +-1e3 are filled in when omitted). A
    coordinate with ``lo == hi`` becomes an equality. ``relative_degree`` is an
    n_y x n_u integer matrix (0/1 entries mean no zeroed numerator slots).
    ``dc_gain`` maps a channel (m, l) to a (lo, hi) gain box, imposed as
    affine constraints under the alpha_0 > 0 sign convention.
    """

    theta_lo: np.ndarray = None
    theta_hi: np.ndarray = None
    relative_degree: np.ndarray = None
    dc_gain: dict = None


@dataclass(frozen=True)
class Clique:
    variables: frozenset
    constraint_ids: tuple


@dataclass(frozen=True)
class PopProblem:
    vars: VarIndex
    constraints: tuple
    objective: Polynomial
    objective_spec: ObjectiveSpec
    cliques: tuple
    objective_clique: int
    var_scales: np.ndarray

    @property
    def n_vars(self):
        return self.vars.n_vars

    def count(self, *kinds):
        return sum(1 for c in self.constraints if c.kind in kinds)

    def equalities(self):
        return [c for c in self.constraints if c.equality]

    def inequalities(self):
        return [c for c in self.constraints if not c.equality]

    def max_violation(self, x):
        """Largest constraint violation at a full decision vector."""
        worst = 0.0
        for c in self.constraints:
            v = c.poly(x)
            worst = max(worst, abs(v) if c.equality else max(0.0, -v))
        return worst

    def to_json(self, path):
        """Diagnostic dump; format not stable across versions."""
        doc = {
            "n_vars": self.n_vars,
            "objective": [[list(k), c] for k, c in self.objective.terms],
            "constraints": [
                {
                    "kind": c.kind,
                    "equality": c.equality,
                    "terms": [[list(k), coeff] for k, coeff in c.poly.terms],
                }
                for c in self.constraints
            ],
            "cliques": [
                {"variables": sorted(cl.variables), "constraints": list(cl.constraint_ids)}
                for cl in self.cliques
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)


def _fill_priors(priors, var_index):
    n_theta = var_index.n_theta
    if priors is None:
        priors = PriorSpec()
    lo = np.full(n_theta, -DEFAULT_THETA_BOX) if priors.theta_lo is None else np.asarray(priors.theta_lo, dtype=float)
    hi = np.full(n_theta, DEFAULT_THETA_BOX) if priors.theta_hi is None else np.asarray(priors.theta_hi, dtype=float)
    if lo.size != n_theta or hi.size != n_theta:
        raise ValueError("prior boxes must have one entry per theta coordinate")
    if np.any(lo > hi):
        raise ValueError("prior box lower bounds exceed upper bounds")
    return priors, lo, hi


def build_pop(dataset, orders, delta, objective=None, priors=None, free_delta=False):
    """Assemble the lifted POP for a dataset and declared channel orders.

    ``delta`` is a DeltaBoundSpec with fixed scale d; with ``free_delta`` the
    scale becomes a trailing decision variable (the feasibility program used
    for bound estimation) and ``delta.d`` is ignored.

    Degenerate (zero-width) noise bands collapse to equality constraints so
    the relaxation can eliminate the pinned samples.
    """
    orders = np.atleast_2d(np.asarray(orders, dtype=int))
    if orders.shape != (dataset.n_y, dataset.n_u):
        raise ValueError("orders matrix must be n_y x n_u")
    objective = objective or ObjectiveSpec(kind="coordinate", index=0)
    vi = VarIndex(orders=orders, N=dataset.N, free_delta=free_delta)
    priors, box_lo, box_hi = _fill_priors(priors, vi)

    if free_delta:
        dd = np.zeros((dataset.N, dataset.n_y))
        phi = delta_phi(delta.kind, dataset)
    else:
        dd = delta_bounds(delta, dataset)
        phi = None

    cons = []

    def const_key(var):
        return ((var, 1),)

    # coupling equations and a_n positivity, per channel
    for m in range(vi.n_y):
        for l in range(vi.n_u):
            n = vi.order_of(m, l)
            a_const, weight = tustin_affine_forms(n, dataset.T_s)
            ai = vi.alpha_idx(m, l)
            bi = vi.beta_idx(m, l)
            gi = vi.gamma_idx(m, l)
            xi = vi.xi_idx(m, l)
            for j in range(n + 1):
                p = _PolyBuilder()
                p.add(const_key(xi[j]), a_const[n])
                for i in range(n):
                    p.add(mono_mul(const_key(xi[j]), const_key(ai[i])), weight[n, i])
                    p.add(const_key(bi[i]), -weight[j, i])
                cons.append(PopConstraint(p.done(), True, "coupling_xi", (m, l, j)))
            for j in range(n):
                p = _PolyBuilder()
                p.add(const_key(gi[j]), a_const[n])
                for i in range(n):
                    p.add(mono_mul(const_key(gi[j]), const_key(ai[i])), weight[n, i])
                    p.add(const_key(ai[i]), -weight[j, i])
                p.add((), -a_const[j])
                cons.append(PopConstraint(p.done(), True, "coupling_gamma", (m, l, j)))
            # excludes the degenerate Tustin branch
            p = _PolyBuilder()
            p.add((), a_const[n] - 1e-6 * 2.0 ** n)
            for i in range(n):
                p.add(const_key(ai[i]), weight[n, i])
            cons.append(PopConstraint(p.done(), False, "an_pos", (m, l)))

    # bilinear recursion equalities, per channel, k = n+1..N
    for m in range(vi.n_y):
        for l in range(vi.n_u):
            n = vi.order_of(m, l)
            gi = vi.gamma_idx(m, l)
            xi = vi.xi_idx(m, l)
            for k in range(n + 1, dataset.N + 1):
                p = _PolyBuilder()
                p.add(const_key(vi.z_idx(m, l, k)), 1.0)
                for j in range(n):
                    p.add(mono_mul(const_key(gi[j]), const_key(vi.z_idx(m, l, k - n + j))), 1.0)
                for j in range(n + 1):
                    p.add(mono_mul(const_key(xi[j]), const_key(vi.u_idx(l, k - n + j))), -1.0)
                cons.append(PopConstraint(p.done(), True, "recursion", (m, l, k)))

    # output band: eta_lo - dd <= ytilde - sum_l z <= eta_hi + dd
    for m in range(vi.n_y):
        for k in range(1, dataset.N + 1):
            resid = _PolyBuilder()  # ytilde_m(k) - sum_l z_{m,l}(k)
            resid.add((), dataset.y_tilde[k - 1, m])
            for l in range(vi.n_u):
                resid.add(const_key(vi.z_idx(m, l, k)), -1.0)
            lo_slack = dataset.eta_lo[k - 1, m] - dd[k - 1, m]
            hi_slack = dataset.eta_hi[k - 1, m] + dd[k - 1, m]
            if not free_delta and lo_slack == hi_slack:
                p = _PolyBuilder(resid)
                p.add((), -hi_slack)
                cons.append(PopConstraint(p.done(), True, "output_eq", (m, k)))
                continue
            hi = _PolyBuilder({k_: -c for k_, c in resid.items()})
            hi.add((), hi_slack)
            lo = _PolyBuilder(resid)
            lo.add((), -lo_slack)
            if free_delta:
                hi.add(const_key(vi.delta_idx), phi[k - 1, m])
                lo.add(const_key(vi.delta_idx), phi[k - 1, m])
            cons.append(PopConstraint(hi.done(), False, "output_hi", (m, k)))
            cons.append(PopConstraint(lo.done(), False, "output_lo", (m, k)))

    # input band: eps_lo <= utilde - u <= eps_hi
    for l in range(vi.n_u):
        for k in range(1, dataset.N + 1):
            lo_b, hi_b = dataset.eps_lo[k - 1, l], dataset.eps_hi[k - 1, l]
            if lo_b == hi_b:
                p = _PolyBuilder()
                p.add((), dataset.u_tilde[k - 1, l] - hi_b)
                p.add(const_key(vi.u_idx(l, k)), -1.0)
                cons.append(PopConstraint(p.done(), True, "input_eq", (l, k)))
                continue
            hi = _PolyBuilder()
            hi.add((), hi_b - dataset.u_tilde[k - 1, l])
            hi.add(const_key(vi.u_idx(l, k)), 1.0)
            cons.append(PopConstraint(hi.done(), False, "input_hi", (l, k)))
            lo = _PolyBuilder()
            lo.add((), dataset.u_tilde[k - 1, l] - lo_b)
            lo.add(const_key(vi.u_idx(l, k)), -1.0)
            cons.append(PopConstraint(lo.done(), False, "input_lo", (l, k)))

    # a-priori information: theta boxes (Archimedean), relative degree, DC gain
    for i in range(vi.n_theta):
        if box_lo[i] == box_hi[i]:
            p = _PolyBuilder({const_key(i): 1.0})
            p.add((), -box_lo[i])
            cons.append(PopConstraint(p.done(), True, "prior_eq", (i,)))
        else:
            lo = _PolyBuilder({const_key(i): 1.0})
            lo.add((), -box_lo[i])
            cons.append(PopConstraint(lo.done(), False, "prior_box_lo", (i,)))
            hi = _PolyBuilder({const_key(i): -1.0})
            hi.add((), box_hi[i])
            cons.append(PopConstraint(hi.done(), False, "prior_box_hi", (i,)))
    if priors.relative_degree is not None:
        rd = np.atleast_2d(np.asarray(priors.relative_degree, dtype=int))
        for m in range(vi.n_y):
            for l in range(vi.n_u):
                r = int(rd[m, l])
                n = vi.order_of(m, l)
                if r <= 1:
                    continue
                if r > n:
                    raise ValueError("relative degree cannot exceed the channel order")
                bi = vi.beta_idx(m, l)
                for j in range(n - r + 1, n):
                    cons.append(PopConstraint(
                        Polynomial.from_dict({const_key(bi[j]): 1.0}),
                        True, "prior_reldeg", (m, l, j)))
    if priors.dc_gain:
        for (m, l), (g_lo, g_hi) in priors.dc_gain.items():
            a0 = vi.alpha_idx(m, l)[0]
            b0 = vi.beta_idx(m, l)[0]
            lo = Polynomial.from_dict({const_key(b0): 1.0, const_key(a0): -g_lo})
            hi = Polynomial.from_dict({const_key(b0): -1.0, const_key(a0): g_hi})
            cons.append(PopConstraint(lo, False, "prior_dc_lo", (m, l)))
            cons.append(PopConstraint(hi, False, "prior_dc_hi", (m, l)))

    if free_delta:
        cons.append(PopConstraint(
            Polynomial.from_dict({const_key(vi.delta_idx): 1.0}),
            False, "delta_nonneg", ()))

    obj_poly = _objective_polynomial(objective, vi, dataset)
    scales = _variable_scales(vi, dataset)
    cliques, obj_clique = build_cliques(vi, cons, obj_poly)
    problem = PopProblem(
        vars=vi,
        constraints=tuple(cons),
        objective=obj_poly,
        objective_spec=objective,
        cliques=cliques,
        objective_clique=obj_clique,
        var_scales=scales,
    )
    audit_cliques(problem)
    return problem


def _objective_polynomial(spec, vi, dataset):
    ck = lambda var: ((var, 1),)
    if spec.kind == "coordinate":
        if not (0 <= spec.index < vi.n_theta):
            raise ValueError("objective coordinate out of range")
        return Polynomial.from_dict({ck(spec.index): spec.sign})
    if spec.kind == "delta_scale":
        return Polynomial.from_dict({ck(vi.delta_idx): spec.sign})
    # simulation error sum_m sum_k (ytilde_m(k) - sum_l z_{m,l}(k))^2
    p = _PolyBuilder()
    for m in range(vi.n_y):
        for k in range(1, dataset.N + 1):
            y = dataset.y_tilde[k - 1, m]
            zs = [vi.z_idx(m, l, k) for l in range(vi.n_u)]
            p.add((), y * y)
            for a in zs:
                p.add(ck(a), -2.0 * y)
            for a in zs:
                for b in zs:
                    p.add(mono_mul(ck(a), ck(b)), 1.0)
    return p.done()


def _variable_scales(vi, dataset):
    """Per-variable magnitudes used by the relaxation's affine rescaling."""
    scales = np.ones(vi.n_vars)
    y_mag = np.maximum(np.max(np.abs(dataset.y_tilde), axis=0), 1e-9)
    u_mag = np.maximum(np.max(np.abs(dataset.u_tilde), axis=0), 1e-9)
    w = 2.0 / dataset.T_s
    for m in range(vi.n_y):
        for l in range(vi.n_u):
            n = vi.order_of(m, l)
            gain = y_mag[m] / u_mag[l]
            for i in range(n):
                scales[vi.alpha_idx(m, l)[i]] = w ** (n - i)
                scales[vi.beta_idx(m, l)[i]] = w ** (n - i) * gain
            scales[vi.gamma_idx(m, l)] = 1.0
            scales[vi.xi_idx(m, l)] = gain
            scales[vi.z_block(m, l):vi.z_block(m, l) + vi.N] = y_mag[m]
    for l in range(vi.n_u):
        scales[vi.u_block(l):vi.u_block(l) + vi.N] = u_mag[l]
    return scales


# --- correlative sparsity ---------------------------------------------------

def build_cliques(var_index, constraints, objective):
    """Clique decomposition: parameter clique plus sliding sample windows.

    Returns ``(cliques, objective_clique)``; every constraint is assigned to
    exactly one clique (the lowest-index clique containing its support).
    ``objective_clique`` is None when the objective spans several windows
    (the simulation-error objective), in which case the problem is usable by
    the local solver but not by the clique-decomposed relaxation.
    """
    vi = var_index
    n_bar = vi.n_bar
    N = vi.N
    theta_psi = frozenset(range(vi.n_theta + vi.n_psi))
    psi = frozenset(range(vi.n_theta, vi.n_theta + vi.n_psi))
    extra = frozenset([vi.delta_idx]) if vi.free_delta else frozenset()

    num_windows = max(1, N - n_bar)
    width = n_bar + 1 if N > n_bar else N
    window_sets = []
    for w in range(1, num_windows + 1):
        V = set()
        for m in range(vi.n_y):
            for l in range(vi.n_u):
                base = vi.z_block(m, l)
                V.update(range(base + w - 1, base + w - 1 + width))
        for l in range(vi.n_u):
            base = vi.u_block(l)
            V.update(range(base + w - 1, base + w - 1 + width))
        window_sets.append(frozenset(V) | psi | extra)

    cliques_vars = [theta_psi | extra] + window_sets

    def window_for(support):
        """Lowest-index clique containing the support."""
        if support <= cliques_vars[0]:
            return 0
        sample_lo, sample_hi = N + 1, 0
        base0 = vi.n_theta + vi.n_psi
        for var in support:
            if var >= base0 and not (vi.free_delta and var == vi.delta_idx):
                k = (var - base0) % N + 1
                sample_lo = min(sample_lo, k)
                sample_hi = max(sample_hi, k)
        w = min(max(1, sample_hi - width + 1), num_windows)
        if support <= cliques_vars[w]:
            return w
        for w, cv in enumerate(cliques_vars):
            if support <= cv:
                return w
        return None

    assignments = [[] for _ in cliques_vars]
    for s, con in enumerate(constraints):
        w = window_for(frozenset(con.poly.support_vars()))
        if w is None:
            raise CliqueAuditError(f"constraint {s} ({con.kind}) fits no clique")
        assignments[w].append(s)

    obj_clique = window_for(frozenset(objective.support_vars()))
    cliques = tuple(Clique(variables=cv, constraint_ids=tuple(a))
                    for cv, a in zip(cliques_vars, assignments))
    return cliques, obj_clique


def audit_cliques(problem):
    """Explicit CS1-CS6 verification; raises CliqueAuditError on any failure."""
    vi = problem.vars
    cliques = problem.cliques
    # CS1: cliques cover all variables
    union = set()
    for cl in cliques:
        union |= cl.variables
    if union != set(range(vi.n_vars)):
        raise CliqueAuditError("CS1: clique variable sets do not cover the catalog")
    # CS2 + CS3: constraint ids partition the constraint index set
    seen = []
    for cl in cliques:
        seen.extend(cl.constraint_ids)
    if sorted(seen) != list(range(len(problem.constraints))):
        raise CliqueAuditError("CS2/CS3: constraint assignment is not a partition")
    # CS4: each constraint's support lies in its clique
    for cl in cliques:
        for s in cl.constraint_ids:
            if not problem.constraints[s].poly.support_vars() <= cl.variables:
                raise CliqueAuditError(f"CS4: constraint {s} escapes its clique")
    # CS5: the objective lives inside one clique (skipped when the objective
    # deliberately spans windows; the relaxation refuses such problems)
    if problem.objective_clique is not None:
        if not problem.objective.support_vars() <= cliques[problem.objective_clique].variables:
            raise CliqueAuditError("CS5: objective escapes its assigned clique")
    elif problem.objective_spec.kind != "simulation_error":
        raise CliqueAuditError("CS5: objective fits no clique")
    # CS6: running intersection property for the generated ordering
    acc = set(cliques[0].variables)
    for r in range(1, len(cliques)):
        inter = cliques[r].variables & acc
        if not inter <= cliques[r - 1].variables:
            raise CliqueAuditError(f"CS6: running intersection fails at clique {r}")
        acc |= cliques[r].variables
    return True


# --- term sparsity ----------------------------------------------------------

def term_sparsity_supports(problem, rho, iterations=1):
    """Per-clique monomial masks from iterated support extension.

    Starting from the constant monomial and the union of constraint (and, if
    applicable, objective) supports, each round adds every basis monomial
    whose product with an already-reached monomial appears in the support
    closure, then closes the support set under products of reached monomials.
    Monotone in ``iterations``; saturates to the full degree-``rho`` basis.
    """
    if rho < 1 or iterations < 1:
        raise ValueError("rho and iterations must be positive")
    masks = []
    for r, cl in enumerate(problem.cliques):
        basis = monomials_upto(cl.variables, rho)
        supports = set()
        for s in cl.constraint_ids:
            supports.update(problem.constraints[s].poly.supports())
        if problem.objective_clique == r:
            supports.update(problem.objective.supports())
        # variables occurring anywhere in the supports are themselves reachable
        for key in list(supports):
            supports.update(((var, 1),) for var in mono_vars(key))
        reached = {()}
        for _ in range(iterations):
            new = {b for b in basis
                   if b not in reached and any(mono_mul(rkey, b) in supports for rkey in reached)}
            if not new:
                break
            reached |= new
            reached_list = sorted(reached)
            for i, k1 in enumerate(reached_list):
                for k2 in reached_list[i:]:
                    supports.add(mono_mul(k1, k2))
        masks.append([b for b in basis if b in reached])
    return masks
