"""Conic solver interface used by the moment relaxations.

Problems are stated over a vector y of n scalar variables:

    minimize    c . y + c0
    subject to  A_eq y  = b_eq
                A_in y + b_in >= 0              (componentwise)
                C_r + sum_i y_i F_{r,i}  PSD    (one block per r)

Each PSD block is stored as a single sparse matrix mapping the augmented
vector [1; y] to the stacked upper triangle of the block, column major and
unscaled.  The wrapper applies the sqrt(2) off-diagonal scaling expected by
the solver backends (Clarabel by default, SCS as an alternative).
"""

import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import RelaxationFailureError

_SQRT2 = np.sqrt(2.0)


def tri_count(size):
    return size * (size + 1) // 2


def tri_index(i, j):
    """Position of entry (i, j), i <= j, in the column-major upper triangle."""
    if i > j:
        i, j = j, i
    return j * (j + 1) // 2 + i


def tri_scaling(size):
    """Scaling vector turning the plain upper triangle into the solver's
    symmetric vectorization (off-diagonal entries times sqrt 2)."""
    scale = np.full(tri_count(size), _SQRT2)
    for j in range(size):
        scale[tri_index(j, j)] = 1.0
    return scale


def smat(size, tri):
    """Expand an unscaled upper-triangle vector back into a dense matrix."""
    M = np.zeros((size, size))
    for j in range(size):
        for i in range(j + 1):
            M[i, j] = M[j, i] = tri[tri_index(i, j)]
    return M


@dataclass
class SdpBlock:
    """One PSD constraint.  ``coeff`` has shape (tri_count(size), n + 1);
    column 0 holds the constant part, column 1 + i the coefficient of y_i."""
    size: int
    coeff: sparse.csc_matrix

    def matrix_at(self, y):
        aug = np.concatenate([[1.0], y])
        return smat(self.size, self.coeff @ aug)


@dataclass
class SdpProblem:
    n: int
    c: np.ndarray
    c0: float = 0.0
    blocks: list = field(default_factory=list)
    eq: sparse.csc_matrix = None
    eq_rhs: np.ndarray = None
    ineq: sparse.csc_matrix = None
    ineq_rhs: np.ndarray = None
    P: sparse.csc_matrix = None  # optional quadratic term: min y'Py/2 + c'y + c0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.c.shape != (self.n,):
            raise ValueError("objective length does not match variable count")
        if self.eq is None:
            self.eq = sparse.csc_matrix((0, self.n))
            self.eq_rhs = np.zeros(0)
        if self.ineq is None:
            self.ineq = sparse.csc_matrix((0, self.n))
            self.ineq_rhs = np.zeros(0)

    def objective_value(self, y):
        val = float(self.c @ y) + self.c0
        if self.P is not None:
            val += 0.5 * float(y @ (self.P @ y))
        return val

    def min_eigenvalue(self, y):
        """Smallest eigenvalue over all PSD blocks at the point y (feasibility
        diagnostic; nonnegative means the blocks are satisfied)."""
        if not self.blocks:
            return 0.0
        return min(float(np.linalg.eigvalsh(b.matrix_at(y))[0]) for b in self.blocks)


@dataclass
class ConicSolution:
    y: np.ndarray
    objective: float
    objective_dual: float
    status: str
    primal_residual: float
    dual_residual: float
    iterations: int
    wall_time: float

    @property
    def ok(self):
        return self.status in ("optimal", "near_optimal")


def _conic_data(problem):
    """Assemble (A, b, cone sizes) in the common Ax + s = b form with the
    cone order zero, nonnegative, PSD-triangle."""
    parts_A = [problem.eq, -problem.ineq]
    parts_b = [problem.eq_rhs, problem.ineq_rhs]
    psd_sizes = []
    for blk in problem.blocks:
        scale = tri_scaling(blk.size)
        coeff = blk.coeff.tocsc()
        parts_A.append(-sparse.diags(scale) @ coeff[:, 1:])
        parts_b.append(scale * np.asarray(coeff[:, [0]].todense()).ravel())
        psd_sizes.append(blk.size)
    A = sparse.vstack([sparse.csc_matrix(p) for p in parts_A], format="csc")
    b = np.concatenate(parts_b)
    return A, b, problem.eq.shape[0], problem.ineq.shape[0], psd_sizes


_CLARABEL_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "near_optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "MaxIterations": "iteration_limit",
    "MaxTime": "iteration_limit",
}


def _solve_clarabel(problem, tol, max_iter, verbose):
    import clarabel

    A, b, _, _, psd_sizes = _conic_data(problem)
    cones = []
    if problem.eq.shape[0]:
        cones.append(clarabel.ZeroConeT(problem.eq.shape[0]))
    if problem.ineq.shape[0]:
        cones.append(clarabel.NonnegativeConeT(problem.ineq.shape[0]))
    cones += [clarabel.PSDTriangleConeT(s) for s in psd_sizes]

    settings = clarabel.DefaultSettings()
    settings.verbose = verbose
    settings.tol_gap_abs = settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.max_iter = max_iter
    # single-threaded by default keeps runs bit-for-bit reproducible
    settings.max_threads = int(os.environ.get("CTSMID_THREADS", "1"))

    P = problem.P if problem.P is not None else sparse.csc_matrix((problem.n, problem.n))
    solver = clarabel.DefaultSolver(sparse.triu(P, format="csc"), problem.c, A, b, cones, settings)
    t0 = time.perf_counter()
    sol = solver.solve()
    wall = time.perf_counter() - t0

    status = _CLARABEL_STATUS.get(str(sol.status).split(".")[-1], "iteration_limit")
    y = np.asarray(sol.x, dtype=float)
    return ConicSolution(
        y=y,
        objective=float(sol.obj_val) + problem.c0,
        objective_dual=float(sol.obj_val_dual) + problem.c0,
        status=status,
        primal_residual=float(sol.r_prim),
        dual_residual=float(sol.r_dual),
        iterations=int(sol.iterations),
        wall_time=wall,
    )


def _solve_scs(problem, tol, max_iter, verbose):
    import scs

    A, b, n_eq, n_in, psd_sizes = _conic_data(problem)
    # SCS vectorizes the lower triangle column-major, which differs from the
    # upper-triangle order used in _conic_data for sizes above two.
    perm = np.arange(b.size)
    offset = n_eq + n_in
    for size in psd_sizes:
        lower = {}
        pos = 0
        for j in range(size):
            for i in range(j, size):
                lower[(j, i)] = pos  # lower (i, j) <-> upper (j, i)
                pos += 1
        for j in range(size):
            for i in range(j + 1):
                perm[offset + tri_index(i, j)] = offset + lower[(i, j)]
        offset += tri_count(size)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    A = A.tocsr()[inv].tocsc()
    b = b[inv]
    cone = {}
    if n_eq:
        cone["z"] = n_eq
    if n_in:
        cone["l"] = n_in
    if psd_sizes:
        cone["s"] = psd_sizes
    data = {"A": A, "b": b, "c": problem.c}
    if problem.P is not None:
        data["P"] = sparse.triu(problem.P, format="csc")
    t0 = time.perf_counter()
    out = scs.SCS(data, cone, eps_abs=tol, eps_rel=tol,
                  max_iters=max_iter, verbose=verbose).solve()
    wall = time.perf_counter() - t0

    info = out["info"]
    raw = info["status"].lower()
    if raw == "solved":
        status = "optimal"
    elif "inaccurate" in raw and "solved" in raw:
        status = "near_optimal"
    elif "infeasible" in raw:
        status = "infeasible"
    elif "unbounded" in raw:
        status = "unbounded"
    else:
        status = "iteration_limit"
    return ConicSolution(
        y=np.asarray(out["x"], dtype=float),
        objective=float(info["pobj"]) + problem.c0,
        objective_dual=float(info["dobj"]) + problem.c0,
        status=status,
        primal_residual=float(info["res_pri"]),
        dual_residual=float(info["res_dual"]),
        iterations=int(info["iter"]),
        wall_time=wall,
    )


def solve(problem, tol=1e-7, max_iter=None, backend="clarabel", verbose=False):
    """Solve an SdpProblem; returns a ConicSolution.

    The dual objective bounds the true minimum from below whenever the
    status is optimal or near_optimal, which is what the identification
    layer uses to widen parameter bounds conservatively.
    """
    if backend == "clarabel":
        return _solve_clarabel(problem, tol, 500 if max_iter is None else max_iter, verbose)
    if backend == "scs":
        return _solve_scs(problem, tol, 100_000 if max_iter is None else max_iter, verbose)
    raise ValueError(f"unknown backend {backend!r}")


# --- SDPA sparse-format export / import -------------------------------------
#
# Layout written: m variables; one PSD block per SdpBlock, then a diagonal
# block collecting the scalar inequalities, then a diagonal block with the
# equalities split into opposing inequality pairs.  The constant objective
# offset has no slot in the format and is dropped on export.

def save_sdpa(problem, path):
    lines = []
    block_sizes = [b.size for b in problem.blocks]
    n_in, n_eq = problem.ineq.shape[0], problem.eq.shape[0]
    if n_in:
        block_sizes.append(-n_in)
    if n_eq:
        block_sizes.append(-2 * n_eq)
    lines.append(str(problem.n))
    lines.append(str(len(block_sizes)))
    lines.append(" ".join(str(s) for s in block_sizes))
    lines.append(" ".join(repr(float(v)) for v in problem.c))

    def emit(mat_no, blk_no, i, j, value):
        if value != 0.0:
            lines.append(f"{mat_no} {blk_no} {i} {j} {float(value)!r}")

    for r, blk in enumerate(problem.blocks, start=1):
        coo = blk.coeff.tocoo()
        for row, col, v in zip(coo.row, coo.col, coo.data):
            j, i = divmod_tri(row)
            # convention: block = sum_i y_i F_i - F0, so F0 = -constant part
            emit(col, r, i + 1, j + 1, -v if col == 0 else v)
    blk_no = len(problem.blocks)
    if n_in:
        blk_no += 1
        coo = problem.ineq.tocoo()
        for row, col, v in zip(coo.row, coo.col, coo.data):
            emit(col + 1, blk_no, row + 1, row + 1, v)
        for row, v in enumerate(problem.ineq_rhs):
            emit(0, blk_no, row + 1, row + 1, -v)
    if n_eq:
        blk_no += 1
        coo = problem.eq.tocoo()
        for row, col, v in zip(coo.row, coo.col, coo.data):
            emit(col + 1, blk_no, row + 1, row + 1, v)
            emit(col + 1, blk_no, n_eq + row + 1, n_eq + row + 1, -v)
        for row, v in enumerate(problem.eq_rhs):
            emit(0, blk_no, row + 1, row + 1, v)
            emit(0, blk_no, n_eq + row + 1, n_eq + row + 1, -v)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def divmod_tri(row):
    """Invert tri_index: recover (j, i) with i <= j from a triangle offset."""
    j = int((np.sqrt(8 * row + 1) - 1) // 2)
    while tri_index(0, j + 1) <= row:
        j += 1
    while tri_index(0, j) > row:
        j -= 1
    return j, row - tri_index(0, j)


def load_sdpa(path):
    """Read back a file written by save_sdpa.  Only the PSD blocks (positive
    sizes) are reconstructed as SdpBlock; diagonal blocks become scalar
    inequality rows."""
    with open(path) as fh:
        tokens = [ln.split("*")[0].strip() for ln in fh if ln.split("*")[0].strip()]
    n = int(tokens[0])
    n_blocks = int(tokens[1])
    sizes = [int(s) for s in tokens[2].replace(",", " ").split()]
    if len(sizes) != n_blocks:
        raise ValueError("block count does not match block size list")
    c = np.array([float(v) for v in tokens[3].replace(",", " ").split()])
    if c.size != n:
        raise ValueError("objective length does not match variable count")

    psd_entries = [dict() for _ in sizes]
    for line in tokens[4:]:
        mat_no, blk, i, j, v = line.split()
        mat_no, blk, i, j, v = int(mat_no), int(blk) - 1, int(i) - 1, int(j) - 1, float(v)
        psd_entries[blk][(mat_no, i, j)] = v

    blocks, ineq_rows, ineq_rhs = [], [], []
    for blk, size in enumerate(sizes):
        if size > 0:
            ntri = tri_count(size)
            coeff = sparse.dok_matrix((ntri, n + 1))
            for (mat_no, i, j), v in psd_entries[blk].items():
                coeff[tri_index(i, j), mat_no] = -v if mat_no == 0 else v
            blocks.append(SdpBlock(size=size, coeff=coeff.tocsc()))
        else:
            rows = {}
            for (mat_no, i, j), v in psd_entries[blk].items():
                if i != j:
                    raise ValueError("off-diagonal entry in a diagonal block")
                rows.setdefault(i, {})[mat_no] = v
            for i in sorted(rows):
                row = np.zeros(n)
                rhs = 0.0
                for mat_no, v in rows[i].items():
                    if mat_no == 0:
                        rhs = -v
                    else:
                        row[mat_no - 1] = v
                ineq_rows.append(row)
                ineq_rhs.append(rhs)

    ineq = sparse.csc_matrix(np.array(ineq_rows)) if ineq_rows else None
    rhs = np.array(ineq_rhs) if ineq_rows else None
    return SdpProblem(n=n, c=c, blocks=blocks, ineq=ineq, ineq_rhs=rhs)


def require_solved(sol, context=""):
    """Raise RelaxationFailureError unless the solve ended usable."""
    if not sol.ok:
        msg = f"conic solve failed with status {sol.status!r}"
        if context:
            msg += f" ({context})"
        raise RelaxationFailureError(msg)
    return sol
