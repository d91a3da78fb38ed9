"""Moment relaxation of the identification POP.

One moment matrix per variable clique, localizing matrices for the
inequality constraints, and plain linear moment conditions for the
equalities.  Moment variables for monomials shared between overlapping
cliques are literally shared, which is what ties the clique blocks
together.  The zeroth moment is fixed to one by folding it into the
constant column.

A presolve pass eliminates variables pinned by single-variable affine
equalities (exactly known inputs or outputs, parameter equality priors)
before any basis is built; this is what keeps the exactly-known-input
instances tractable at relaxation order two.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from .errors import RelaxationFailureError
from .pop import (
    ObjectiveSpec,
    Polynomial,
    PopProblem,
    mono_degree,
    mono_mul,
    monomials_upto,
    term_sparsity_supports,
)
from .sdp import SdpBlock, SdpProblem, tri_count, tri_index


def _substitute(poly, pinned):
    if not pinned:
        return poly
    out = {}
    for key, coeff in poly.terms:
        val = coeff
        rest = []
        for var, p in key:
            if var in pinned:
                val *= pinned[var] ** p
            else:
                rest.append((var, p))
        rkey = tuple(rest)
        out[rkey] = out.get(rkey, 0.0) + val
    return Polynomial.from_dict(out)


def _rescale(poly, scales):
    out = {}
    for key, coeff in poly.terms:
        for var, p in key:
            coeff *= scales[var] ** p
        out[key] = out.get(key, 0.0) + coeff
    return Polynomial.from_dict(out)


def _max_abs_coeff(poly):
    return max((abs(c) for _, c in poly.terms), default=0.0)


def detect_pins(constraints):
    """Variables fixed by single-variable affine equalities, propagated to a
    fixpoint (pinning a parameter can collapse a coupling equality into a
    new pin).  Returns {var: value}; raises on contradictions."""
    pinned = {}
    polys = {i: c.poly for i, c in enumerate(constraints) if c.equality}
    changed = True
    while changed:
        changed = False
        for i in list(polys):
            q = _substitute(polys[i], pinned)
            polys[i] = q
            terms = dict(q.terms)
            const = terms.pop((), 0.0)
            if not terms:
                if abs(const) > 1e-8 * (1.0 + _max_abs_coeff(constraints[i].poly)):
                    raise RelaxationFailureError(
                        f"presolve found a contradictory equality ({constraints[i].kind})")
                del polys[i]
            elif len(terms) == 1:
                (key, a), = terms.items()
                if len(key) == 1 and key[0][1] == 1:
                    var = key[0][0]
                    val = -const / a
                    prev = pinned.get(var)
                    if prev is None:
                        pinned[var] = val
                        changed = True
                    elif abs(prev - val) > 1e-6 * (1.0 + abs(val)):
                        raise RelaxationFailureError(
                            f"presolve pinned variable {var} to two different values")
                    del polys[i]
    return pinned


@dataclass
class Relaxation:
    pop: PopProblem
    rho: int
    sdp: SdpProblem
    y_monomials: list
    y_index: dict
    pinned: dict
    bases: list

    @property
    def n_moments(self):
        return len(self.y_monomials)

    def block_sizes(self):
        return [b.size for b in self.sdp.blocks]

    def extract_point(self, y):
        """First-order moments mapped back to a full physical decision
        vector; pinned variables take their pinned values."""
        scales = self.pop.var_scales
        x = np.full(self.pop.n_vars, np.nan)
        for var, val in self.pinned.items():
            x[var] = val
        for var in range(self.pop.n_vars):
            if var in self.pinned:
                continue
            pos = self.y_index.get(((var, 1),))
            if pos is not None:
                x[var] = scales[var] * y[pos]
        return x


def _objective_poly(spec, pop):
    if spec.kind == "coordinate":
        return Polynomial.from_dict({((int(spec.index), 1),): spec.sign})
    if spec.kind == "delta_scale":
        return Polynomial.from_dict({((pop.vars.delta_idx, 1),): spec.sign})
    raise RelaxationFailureError(
        "the simulation-error objective spans every window clique and has no "
        "clique-decomposed relaxation; use the local solver instead")


def _scaled_objective(spec, pop, pinned):
    poly = _rescale(_substitute(_objective_poly(spec, pop), pinned), pop.var_scales)
    return poly


def _objective_vector(poly, y_index, n):
    c = np.zeros(n)
    c0 = 0.0
    for key, coeff in poly.terms:
        if key == ():
            c0 += coeff
        else:
            pos = y_index.get(key)
            if pos is None:
                raise RelaxationFailureError("objective monomial missing from the catalog")
            c[pos] += coeff
    return c, c0


def assemble(pop, rho=2, ts_iterations=None, presolve=True):
    """Build the order-``rho`` clique-decomposed relaxation of a PopProblem.

    ``ts_iterations`` switches the per-clique monomial bases to the term
    sparsity masks with that many extension rounds; None uses the full
    degree-``rho`` bases.  Returns a Relaxation whose ``sdp`` field is ready
    for :func:`ctsmid.sdp.solve`.
    """
    if pop.objective_clique is None:
        _objective_poly(pop.objective_spec, pop)  # raises for simulation_error
        raise RelaxationFailureError("objective fits no clique")
    if rho < 1:
        raise ValueError("rho must be at least 1")

    pinned = detect_pins(pop.constraints) if presolve else {}
    scales = pop.var_scales

    # substitute pins, rescale, equilibrate; drop constraints made trivial
    reduced = []  # (clique index, equality, poly) in clique order
    sub_polys = []
    for r, cl in enumerate(pop.cliques):
        for s in cl.constraint_ids:
            con = pop.constraints[s]
            poly = _rescale(_substitute(con.poly, pinned), scales)
            sub_polys.append((s, _substitute(con.poly, pinned)))
            terms = dict(poly.terms)
            const = terms.pop((), 0.0)
            if not terms:
                ref = 1.0 + _max_abs_coeff(_rescale(con.poly, scales))
                bad = abs(const) > 1e-8 * ref if con.equality else const < -1e-8 * ref
                if bad:
                    raise RelaxationFailureError(
                        f"presolve left an unsatisfiable {con.kind} constraint")
                continue
            norm = max(abs(const), max(abs(v) for v in terms.values()))
            poly = Polynomial.from_dict(
                {k: v / norm for k, v in [((), const)] + list(terms.items())})
            reduced.append((r, con.equality, poly, con.kind))

    # per-clique bases over the surviving variables
    if ts_iterations is not None:
        shadow_cons = [None] * len(pop.constraints)
        for s, poly in sub_polys:
            shadow_cons[s] = replace(pop.constraints[s], poly=poly)
        shadow_cliques = tuple(
            replace(cl, variables=frozenset(v for v in cl.variables if v not in pinned))
            for cl in pop.cliques)
        shadow = replace(pop, constraints=tuple(shadow_cons), cliques=shadow_cliques,
                         objective=_substitute(pop.objective, pinned))
        masks = term_sparsity_supports(shadow, rho, iterations=ts_iterations)
        bases = [sorted(set(m), key=lambda k: (mono_degree(k), k)) for m in masks]
    else:
        bases = [monomials_upto([v for v in cl.variables if v not in pinned], rho)
                 for cl in pop.cliques]

    y_index = {}
    y_monomials = []

    def ypos(key):
        pos = y_index.get(key)
        if pos is None:
            pos = len(y_monomials)
            y_index[key] = pos
            y_monomials.append(key)
        return pos

    def col(key):
        return 0 if key == () else ypos(key) + 1

    # moment matrix per clique
    block_specs = []  # (size, entries) with entries = [(tri_row, col, val)]
    for r, basis in enumerate(bases):
        entries = []
        for q in range(len(basis)):
            for p in range(q + 1):
                entries.append((tri_index(p, q), col(mono_mul(basis[p], basis[q])), 1.0))
        block_specs.append((len(basis), entries))

    eq_rows = []  # (coeffs {col: val}) with constant folded into rhs
    for r, equality, poly, kind in reduced:
        basis = bases[r]
        if equality:
            d = poly.degree()
            mults = [m for m in monomials_upto([v for v in pop.cliques[r].variables
                                                if v not in pinned], 2 * rho - d)]
            if ts_iterations is not None:
                in_mask = set(bases[r])
                mults = [m for m in mults if m in in_mask or m == ()]
            for m in mults:
                row = {}
                for key, coeff in poly.terms:
                    c = col(mono_mul(key, m))
                    row[c] = row.get(c, 0.0) + coeff
                eq_rows.append(row)
        else:
            d = poly.degree()
            loc_deg = rho - (d + 1) // 2
            loc = [m for m in basis if mono_degree(m) <= loc_deg]
            entries = []
            for q in range(len(loc)):
                for p in range(q + 1):
                    base = mono_mul(loc[p], loc[q])
                    for key, coeff in poly.terms:
                        entries.append((tri_index(p, q), col(mono_mul(key, base)), coeff))
            block_specs.append((len(loc), entries))

    n = len(y_monomials)
    blocks = []
    for size, entries in block_specs:
        rows = [e[0] for e in entries]
        cols = [e[1] for e in entries]
        vals = [e[2] for e in entries]
        coeff = sparse.coo_matrix((vals, (rows, cols)),
                                  shape=(tri_count(size), n + 1)).tocsc()
        blocks.append(SdpBlock(size=size, coeff=coeff))

    eq_r, eq_c, eq_v, eq_b = [], [], [], []
    for i, row in enumerate(eq_rows):
        rhs = -row.pop(0, 0.0)
        for c, v in row.items():
            eq_r.append(i)
            eq_c.append(c - 1)
            eq_v.append(v)
        eq_b.append(rhs)
    eq = sparse.coo_matrix((eq_v, (eq_r, eq_c)), shape=(len(eq_rows), n)).tocsc()

    obj = _scaled_objective(pop.objective_spec, pop, pinned)
    c, c0 = _objective_vector(obj, y_index, n)
    sdp = SdpProblem(n=n, c=c, c0=c0, blocks=blocks,
                     eq=eq, eq_rhs=np.array(eq_b))
    return Relaxation(pop=pop, rho=rho, sdp=sdp, y_monomials=y_monomials,
                      y_index=y_index, pinned=pinned, bases=bases)


def with_objective(relaxation, spec):
    """Same relaxation, different (coordinate or delta-scale) objective.
    The PSD blocks and equality rows are shared, so swapping objectives
    between solves costs almost nothing."""
    if not isinstance(spec, ObjectiveSpec):
        raise TypeError("spec must be an ObjectiveSpec")
    obj = _scaled_objective(spec, relaxation.pop, relaxation.pinned)
    c, c0 = _objective_vector(obj, relaxation.y_index, relaxation.sdp.n)
    sdp = SdpProblem(n=relaxation.sdp.n, c=c, c0=c0, blocks=relaxation.sdp.blocks,
                     eq=relaxation.sdp.eq, eq_rhs=relaxation.sdp.eq_rhs,
                     ineq=relaxation.sdp.ineq, ineq_rhs=relaxation.sdp.ineq_rhs)
    return Relaxation(pop=relaxation.pop, rho=relaxation.rho, sdp=sdp,
                      y_monomials=relaxation.y_monomials, y_index=relaxation.y_index,
                      pinned=relaxation.pinned, bases=relaxation.bases)


def lift_point(relaxation, x):
    """Moment vector of the Dirac measure at a feasible physical point x;
    useful for feasibility smoke tests of an assembled relaxation."""
    scales = relaxation.pop.var_scales
    xhat = np.asarray(x, dtype=float) / scales
    y = np.empty(relaxation.sdp.n)
    for key, pos in relaxation.y_index.items():
        val = 1.0
        for var, p in key:
            val *= xhat[var] ** p
        y[pos] = val
    return y
