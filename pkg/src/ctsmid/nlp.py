"""Local solver for the smooth polynomial programs.

Two jobs: the discretization-bound program (minimize the scale d such that
the identification constraints are feasible) and the simulation-error
refinement theta^E.  Both are solved by an augmented Lagrangian over the
degree-<=2 constraint polynomials with L-BFGS-B inner iterations, followed
by a fixed-theta conic polish: once theta is frozen the remaining
constraints are affine in (z, u, d), so a linear (or, for the simulation
error, quadratic) program recovers an exactly feasible witness.
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize, sparse

from .errors import BoundEstimationError, DegenerateMapError
from .lti import ContinuousTf, dt_simulate, tustin_map
from .pop import ObjectiveSpec, PriorSpec, build_pop
from .relax import _rescale
from .sdp import SdpProblem, solve
from .signals import delta_bounds

FEAS_TOL = 1e-6


# --- compiled quadratic forms ------------------------------------------------

@dataclass
class _Quad:
    """c0 + a.x + sum c_ij x_i x_j for one polynomial (degree <= 2)."""
    c0: float
    lin_idx: np.ndarray
    lin_c: np.ndarray
    qi: np.ndarray
    qj: np.ndarray
    qc: np.ndarray

    def value(self, x):
        v = self.c0
        if self.lin_idx.size:
            v += self.lin_c @ x[self.lin_idx]
        if self.qi.size:
            v += self.qc @ (x[self.qi] * x[self.qj])
        return v

    def add_grad(self, x, w, g):
        """g += w * grad at x."""
        if self.lin_idx.size:
            np.add.at(g, self.lin_idx, w * self.lin_c)
        if self.qi.size:
            np.add.at(g, self.qi, w * self.qc * x[self.qj])
            np.add.at(g, self.qj, w * self.qc * x[self.qi])


def _compile(poly):
    c0 = 0.0
    li, lc, qi, qj, qc = [], [], [], [], []
    for key, coeff in poly.terms:
        deg = sum(p for _, p in key)
        if deg == 0:
            c0 += coeff
        elif deg == 1:
            li.append(key[0][0])
            lc.append(coeff)
        elif deg == 2:
            if len(key) == 1:  # x_i^2: split symmetrically so add_grad doubles it
                qi.append(key[0][0])
                qj.append(key[0][0])
                qc.append(coeff)
            else:
                qi.append(key[0][0])
                qj.append(key[1][0])
                qc.append(coeff)
        else:
            raise ValueError("nlp handles polynomials of degree <= 2 only")
    return _Quad(c0, np.array(li, dtype=int), np.array(lc),
                 np.array(qi, dtype=int), np.array(qj, dtype=int), np.array(qc))


@dataclass
class NlpSolution:
    point: np.ndarray
    objective: float
    violation: float
    status: str  # feasible_local | infeasible_local | iteration_limit

    @property
    def feasible(self):
        return self.status == "feasible_local"


def _scaled_problem(problem):
    """Compile objective and constraints in scaled variables, each constraint
    equilibrated to unit max coefficient."""
    scales = problem.var_scales
    obj = _compile(_rescale(problem.objective, scales))
    eqs, ineqs = [], []
    for con in problem.constraints:
        poly = _rescale(con.poly, scales)
        norm = max((abs(c) for _, c in poly.terms), default=1.0)
        from .pop import Polynomial
        poly = Polynomial(terms=tuple((k, c / norm) for k, c in poly.terms))
        (eqs if con.equality else ineqs).append(_compile(poly))
    return obj, eqs, ineqs


def _violation(eqs, ineqs, x):
    worst = 0.0
    for q in eqs:
        worst = max(worst, abs(q.value(x)))
    for q in ineqs:
        worst = max(worst, -min(0.0, q.value(x)))
    return worst


def auglag_minimize(problem, x0, feas_tol=FEAS_TOL, max_outer=25, inner_iter=200):
    """Augmented-Lagrangian minimization of a PopProblem from the physical
    starting point x0.  Returns an NlpSolution in physical units; the
    violation field is measured on unit-equilibrated scaled constraints."""
    scales = problem.var_scales
    obj, eqs, ineqs = _scaled_problem(problem)
    x = np.asarray(x0, dtype=float) / scales

    lam_e = np.zeros(len(eqs))
    lam_i = np.zeros(len(ineqs))
    mu = 10.0
    prev_v = np.inf

    def merit(x):
        val = obj.value(x)
        g = np.zeros_like(x)
        obj.add_grad(x, 1.0, g)
        for q, lam in zip(eqs, lam_e):
            h = q.value(x)
            val += lam * h + 0.5 * mu * h * h
            q.add_grad(x, lam + mu * h, g)
        for q, lam in zip(ineqs, lam_i):
            t = lam - mu * q.value(x)
            if t > 0.0:
                val += (t * t - lam * lam) / (2.0 * mu)
                q.add_grad(x, -t, g)
            else:
                val -= lam * lam / (2.0 * mu)
        return val, g

    for _ in range(max_outer):
        res = optimize.minimize(merit, x, jac=True, method="L-BFGS-B",
                                options={"maxiter": inner_iter})
        x = res.x
        v = _violation(eqs, ineqs, x)
        if v <= feas_tol:
            break
        lam_e += mu * np.array([q.value(x) for q in eqs])
        if ineqs:
            lam_i = np.maximum(0.0, lam_i - mu * np.array([q.value(x) for q in ineqs]))
        if v > 0.25 * prev_v:
            mu = min(mu * 10.0, 1e8)
        prev_v = v

    v = _violation(eqs, ineqs, x)
    status = "feasible_local" if v <= feas_tol else "iteration_limit"
    return NlpSolution(point=x * scales, objective=obj.value(x),
                       violation=v, status=status)


# --- least-squares initialization --------------------------------------------

def _ls_initial_theta(dataset, orders):
    """Per-channel DT least squares on the raw measurements (z := y-tilde,
    u := u-tilde), mapped back to CT parameters through the coupling
    equations.  MISO channels are fit one at a time against the shared
    output, which is crude but only needs to land in the right basin."""
    from .lti import tustin_affine_forms

    theta = []
    n_y = len(orders)
    for m in range(n_y):
        for l, n in enumerate(orders[m]):
            y = dataset.y_tilde[:, m]
            u = dataset.u_tilde[:, l]
            N = dataset.N
            rows, rhs = [], []
            for k in range(n + 1, N + 1):
                row = np.concatenate([-y[k - n - 1:k - 1], u[k - n - 1:k]])
                rows.append(row)
                rhs.append(y[k - 1])
            psi, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
            gamma, xi = psi[:n], psi[n:]
            a_const, weight = tustin_affine_forms(n, dataset.T_s)
            # alpha solves a_j(alpha) = gamma_j * a_n(alpha), j = 0..n-1
            A = weight[:n, :] - np.outer(gamma, weight[n, :])
            b = gamma * a_const[n] - a_const[:n]
            alpha = np.linalg.lstsq(A, b, rcond=None)[0]
            a_n = a_const[n] + weight[n, :] @ alpha
            beta = np.linalg.lstsq(weight, xi * a_n, rcond=None)[0]
            theta.append(np.concatenate([alpha, beta]))
    return np.concatenate(theta)


def _initial_point(problem, dataset, theta):
    vi = problem.vars
    x = np.zeros(problem.n_vars)
    pos = 0
    for m in range(vi.n_y):
        for l in range(vi.n_u):
            n = vi.order_of(m, l)
            alpha, beta = theta[pos:pos + n], theta[pos + n:pos + 2 * n]
            pos += 2 * n
            x[vi.alpha_idx(m, l)] = alpha
            x[vi.beta_idx(m, l)] = beta
            try:
                t = tustin_map(ContinuousTf(alpha=alpha, beta=beta), dataset.T_s)
                x[vi.gamma_idx(m, l)] = t.gamma
                x[vi.xi_idx(m, l)] = t.xi
            except DegenerateMapError:
                pass
            x[vi.z_block(m, l):vi.z_block(m, l) + vi.N] = dataset.y_tilde[:, m] / vi.n_u
    for l in range(vi.n_u):
        x[vi.u_block(l):vi.u_block(l) + vi.N] = dataset.u_tilde[:, l]
    if vi.free_delta:
        # start from the largest normalized band residual: feasible by construction
        resid = 0.0
        for con in problem.constraints:
            if con.kind in ("output_hi", "output_lo"):
                coef = max(con.poly.coeff_dict().get(((vi.delta_idx, 1),), 1.0), 1e-12)
                resid = max(resid, -con.poly(x) / coef)
        x[vi.delta_idx] = resid + 1e-3
    return x


# --- fixed-theta conic programs ----------------------------------------------

def fixed_theta_program(dataset, orders, theta, delta, d=None, objective="none",
                        priors=None):
    """Conic program in (z, u[, d]) at frozen theta.

    objective: "none" (pure feasibility), "min_d" (d free, minimized), or
    "sim_error" (quadratic output-mismatch objective, d fixed).
    Returns (SdpProblem, index maps) where index maps give the (z, u, d)
    variable layout.  Raises DegenerateMapError when theta sits on the
    Tustin singularity.
    """
    orders = np.asarray(orders, dtype=int)
    n_y, n_u = orders.shape
    N = dataset.N
    free_d = objective == "min_d"
    if free_d:
        phi = delta_bounds(type(delta)(kind=delta.kind, d=1.0), dataset)
    else:
        phi = delta_bounds(delta, dataset) if d is None else \
            delta_bounds(type(delta)(kind=delta.kind, d=float(d)), dataset)

    # variable layout: z channels row-major, then u channels, then optional d
    z_base = {}
    off = 0
    for m in range(n_y):
        for l in range(n_u):
            z_base[(m, l)] = off
            off += N
    u_base = {l: off + l * N for l in range(n_u)}
    off += n_u * N
    d_pos = off if free_d else None
    nv = off + (1 if free_d else 0)

    # per-channel DT coefficients at frozen theta
    psi = {}
    pos = 0
    for m in range(n_y):
        for l in range(n_u):
            n = orders[m, l]
            alpha, beta = theta[pos:pos + n], theta[pos + n:pos + 2 * n]
            pos += 2 * n
            psi[(m, l)] = tustin_map(ContinuousTf(alpha=alpha, beta=beta), dataset.T_s)

    eq_r, eq_c, eq_v, eq_b = [], [], [], []
    in_r, in_c, in_v, in_b = [], [], [], []
    row_e = row_i = 0

    def eq_row(cols, vals, rhs):
        nonlocal row_e
        for c, v in zip(cols, vals):
            eq_r.append(row_e)
            eq_c.append(c)
            eq_v.append(v)
        eq_b.append(rhs)
        row_e += 1

    def ineq_row(cols, vals, rhs):
        """sum vals * x + rhs >= 0"""
        nonlocal row_i
        for c, v in zip(cols, vals):
            in_r.append(row_i)
            in_c.append(c)
            in_v.append(v)
        in_b.append(rhs)
        row_i += 1

    for (m, l), t in psi.items():
        n = orders[m, l]
        zb, ub = z_base[(m, l)], u_base[l]
        for k in range(n + 1, N + 1):
            cols = [zb + k - 1] + [zb + k - n + j - 1 for j in range(n)] \
                 + [ub + k - n + j - 1 for j in range(n + 1)]
            vals = [1.0] + list(t.gamma) + list(-t.xi)
            eq_row(cols, vals, 0.0)

    for m in range(n_y):
        for k in range(N):
            cols = [z_base[(m, l)] + k for l in range(n_u)]
            up = dataset.y_tilde[k, m] - dataset.eta_lo[k, m]
            lo = dataset.y_tilde[k, m] - dataset.eta_hi[k, m]
            if free_d:
                # sum_l z <= y - eta_lo + d*phi ; sum_l z >= y - eta_hi - d*phi
                ineq_row(cols + [d_pos], [-1.0] * n_u + [phi[k, m]], up)
                ineq_row(cols + [d_pos], [1.0] * n_u + [phi[k, m]], -lo)
            else:
                ineq_row(cols, [-1.0] * n_u, up + phi[k, m])
                ineq_row(cols, [1.0] * n_u, -lo + phi[k, m])
    for l in range(n_u):
        for k in range(N):
            lo = dataset.u_tilde[k, l] - dataset.eps_hi[k, l]
            hi = dataset.u_tilde[k, l] - dataset.eps_lo[k, l]
            if hi - lo <= 0.0:
                eq_row([u_base[l] + k], [1.0], lo)
            else:
                ineq_row([u_base[l] + k], [-1.0], hi)
                ineq_row([u_base[l] + k], [1.0], -lo)
    if free_d:
        ineq_row([d_pos], [1.0], 0.0)

    c = np.zeros(nv)
    P = None
    c0 = 0.0
    if free_d:
        c[d_pos] = 1.0
    elif objective == "sim_error":
        # sum_m,k (y(k,m) - sum_l z_{m,l}(k))^2
        pr, pc, pv = [], [], []
        for m in range(n_y):
            for k in range(N):
                cols = [z_base[(m, l)] + k for l in range(n_u)]
                y = dataset.y_tilde[k, m]
                c0 += y * y
                for a in cols:
                    c[a] -= 2.0 * y
                    for b in cols:
                        pr.append(a)
                        pc.append(b)
                        pv.append(2.0)
        P = sparse.coo_matrix((pv, (pr, pc)), shape=(nv, nv)).tocsc()

    prob = SdpProblem(
        n=nv, c=c, c0=c0, P=P,
        eq=sparse.coo_matrix((eq_v, (eq_r, eq_c)), shape=(row_e, nv)).tocsc(),
        eq_rhs=np.array(eq_b),
        ineq=sparse.coo_matrix((in_v, (in_r, in_c)), shape=(row_i, nv)).tocsc(),
        ineq_rhs=np.array(in_b),
    )
    return prob, {"z_base": z_base, "u_base": u_base, "d": d_pos}


# --- the two entry points ----------------------------------------------------

def estimate_delta_bound(dataset, orders, delta_kind="uniform", priors=None,
                         multistart=5, seed=0, feas_tol=FEAS_TOL):
    """Smallest discretization-error scale d* that makes the identification
    constraints feasible, with a feasible witness.

    Local search over the full variable set followed by a fixed-theta LP
    polish, over ``multistart`` seeded restarts.  d* is an upper bound on
    the true minimum (local method); note it can also underestimate the
    physical discretization error when the noise bounds are conservative.
    """
    from .signals import DeltaBoundSpec

    delta = DeltaBoundSpec(kind=delta_kind, d=0.0)
    problem = build_pop(dataset, orders, delta,
                        objective=ObjectiveSpec(kind="delta_scale"),
                        priors=priors, free_delta=True)
    caps = [np.max(dataset.eta_hi), np.max(-dataset.eta_lo),
            np.max(dataset.eps_hi), np.max(-dataset.eps_lo), np.max(np.abs(dataset.y_tilde))]
    d_max = 10.0 * max(caps)

    theta0 = _ls_initial_theta(dataset, orders)
    rng = np.random.default_rng(seed)
    best = None
    for trial in range(max(1, multistart)):
        theta = theta0 if trial == 0 else theta0 * (1.0 + 0.1 * rng.standard_normal(theta0.size))
        x0 = _initial_point(problem, dataset, theta)
        local = auglag_minimize(problem, x0, feas_tol=feas_tol)
        theta_loc = local.point[:problem.vars.n_theta]
        try:
            lp, layout = fixed_theta_program(dataset, orders, theta_loc, delta,
                                             objective="min_d", priors=priors)
        except DegenerateMapError:
            continue
        sol = solve(lp, tol=1e-9)
        if not sol.ok:
            continue
        d_trial = max(0.0, float(sol.y[layout["d"]]))
        if best is None or d_trial < best[0]:
            witness = _assemble_witness(problem, dataset, theta_loc, sol.y, layout)
            best = (d_trial, witness)
    if best is None or best[0] > d_max:
        raise BoundEstimationError(
            "no feasible discretization bound found below the cap "
            f"d_max = {d_max:.3g}")
    d_star, witness = best
    viol = _witness_violation(problem, witness)
    status = "feasible_local" if viol <= feas_tol else "iteration_limit"
    return d_star, NlpSolution(point=witness, objective=d_star,
                               violation=viol, status=status)


def _assemble_witness(problem, dataset, theta, y, layout):
    vi = problem.vars
    x = np.zeros(problem.n_vars)
    pos = 0
    for m in range(vi.n_y):
        for l in range(vi.n_u):
            n = vi.order_of(m, l)
            alpha, beta = theta[pos:pos + n], theta[pos + n:pos + 2 * n]
            pos += 2 * n
            x[vi.alpha_idx(m, l)] = alpha
            x[vi.beta_idx(m, l)] = beta
            t = tustin_map(ContinuousTf(alpha=alpha, beta=beta), dataset.T_s)
            x[vi.gamma_idx(m, l)] = t.gamma
            x[vi.xi_idx(m, l)] = t.xi
            zb = layout["z_base"][(m, l)]
            x[vi.z_block(m, l):vi.z_block(m, l) + vi.N] = y[zb:zb + vi.N]
    for l in range(vi.n_u):
        ub = layout["u_base"][l]
        x[vi.u_block(l):vi.u_block(l) + vi.N] = y[ub:ub + vi.N]
    if vi.free_delta and layout["d"] is not None:
        x[vi.delta_idx] = max(0.0, y[layout["d"]])
    return x


def _witness_violation(problem, x):
    """Violation of the witness on unit-equilibrated constraints."""
    worst = 0.0
    for con in problem.constraints:
        norm = max((abs(c) for _, c in con.poly.terms), default=1.0)
        v = con.poly(x) / norm
        worst = max(worst, abs(v) if con.equality else max(0.0, -v))
    return worst


def refine_theta_e(dataset, orders, delta, theta_init, priors=None,
                   feas_tol=FEAS_TOL):
    """Simulation-error refinement: local minimization of the output
    mismatch over the full constraint set starting at theta_init, then a
    fixed-theta QP giving the exactly feasible completion.  The returned
    objective never exceeds the objective of theta_init's own feasible
    completion (descent property)."""
    problem = build_pop(dataset, orders, delta,
                        objective=ObjectiveSpec(kind="simulation_error"),
                        priors=priors)

    def completion(theta):
        qp, layout = fixed_theta_program(dataset, orders, theta, delta,
                                         objective="sim_error", priors=priors)
        sol = solve(qp, tol=1e-9)
        if not sol.ok:
            return None
        return sol.objective, _assemble_witness(problem, dataset, theta, sol.y, layout)

    base = completion(np.asarray(theta_init, dtype=float))
    x0 = _initial_point(problem, dataset, np.asarray(theta_init, dtype=float))
    local = auglag_minimize(problem, x0, feas_tol=feas_tol)
    cand = None
    try:
        cand = completion(local.point[:problem.vars.n_theta])
    except DegenerateMapError:
        pass
    options = [c for c in (base, cand) if c is not None]
    if not options:
        return NlpSolution(point=x0, objective=np.inf, violation=np.inf,
                           status="infeasible_local")
    obj, x = min(options, key=lambda c: c[0])
    viol = _witness_violation(problem, x)
    status = "feasible_local" if viol <= feas_tol else "iteration_limit"
    return NlpSolution(point=x, objective=obj, violation=viol, status=status)
