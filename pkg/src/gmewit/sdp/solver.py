"""Primal-dual path-following interior-point core.

Canonical form (after compilation):

    maximize  b . y   subject to   S_b = C_b + sum_i y_i A_{b,i}  >= 0

over real symmetric blocks (dense or diagonal).  Mehrotra
predictor-corrector steps with the HKM direction; the Schur complement
M_ij = sum_b Tr(A_i X A_j S^-1) is assembled per block and factorized in
block-arrow form: parameter groups touching disjoint block sets (for the
entanglement programs: one R_A per bipartition) are eliminated first,
leaving a dense corner for globally coupled parameters.

Multipliers X_b certify the optimum: b.y <= sum_b <C_b, X_b> whenever
A^T(X) = -b, X >= 0, so the reported duality gap is sum_b <S_b, X_b>.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import cholesky, solve_triangular

from .model import (
    HermitianVariable,
    LmiConstraint,
    MatExpr,
    RealVariable,
    ScalarBound,
    ScalarEquality,
    SdpProblem,
    embed_complex,
    params_to_hermitian,
)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERATIONS = 200
GAP_CERT = 1e-7  # certified duality gap for status "optimal"
FEAS_CERT = 1e-8


class SdpError(RuntimeError):
    pass


@dataclass
class SdpSolution:
    status: str  # optimal | infeasible | unbounded | max_iterations
    primal_value: float
    dual_value: float
    duality_gap: float
    variable_values: dict
    iterations: int
    info: dict = field(default_factory=dict)

    @property
    def y(self):
        return self.info.get("y")


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------

@dataclass
class _Block:
    kind: str  # dense | diag
    size: int
    const: np.ndarray
    terms: list  # (group_index, mat (n_g, size^2) ndarray or CSR)


@dataclass
class _Compiled:
    groups: list  # (name, offset, n_params)
    m: int
    b: np.ndarray
    blocks: list
    var_kinds: dict  # name -> ("herm", dim) | ("real", size)


def compile_problem(problem: SdpProblem, require_coverage=True) -> _Compiled:
    groups, var_kinds = [], {}
    offset = 0
    index = {}
    for name in problem._order:
        var = problem.variables[name]
        index[name] = len(groups)
        groups.append((name, offset, var.n_params))
        var_kinds[name] = (
            ("herm", var.dim) if isinstance(var, HermitianVariable) else ("real", var.size)
        )
        offset += var.n_params
    m = offset
    if m == 0:
        raise SdpError("problem has no variables")

    b = np.zeros(m)
    for name, coefs in problem.objective.coefs.items():
        gi = index[name]
        _, off, n = groups[gi]
        b[off : off + n] = coefs

    blocks = []
    diag_consts, diag_terms = [], {}
    diag_len = 0
    equalities = []

    def add_diag_rows(const_vals, row_map):
        nonlocal diag_len
        base = diag_len
        diag_consts.extend(const_vals)
        diag_len += len(const_vals)
        for gname, entries in row_map.items():
            diag_terms.setdefault(gname, []).extend(
                (base + r, col, val) for r, col, val in entries
            )

    for con in problem.constraints:
        if isinstance(con, LmiConstraint):
            expr = con.expr
            dim = 2 * expr.dim
            const = embed_complex(expr.const)
            const = 0.5 * (const + const.T)
            terms = []
            for name, mat in expr.terms.items():
                terms.append((index[name], mat))
            blocks.append(_Block("dense", dim, const, terms))
        elif isinstance(con, ScalarBound):
            rows = {}
            for name, vec in con.expr.coefs.items():
                vec = np.asarray(vec, dtype=float)
                rows[name] = [(0, j, v) for j, v in enumerate(vec) if v != 0.0]
            add_diag_rows([con.expr.const], rows)
        elif isinstance(con, ScalarEquality):
            equalities.append(con.expr)
        elif isinstance(con, tuple) and con[0] in ("box_lower", "box_upper"):
            kind, name, bound = con
            n = problem.variables[name].n_params
            sign = 1.0 if kind == "box_lower" else -1.0
            const = [-bound if kind == "box_lower" else bound] * n
            rows = {name: [(i, i, sign) for i in range(n)]}
            add_diag_rows(const, rows)
        else:
            raise SdpError(f"unsupported constraint {con!r}")

    if diag_len:
        terms = []
        for gname, triplets in diag_terms.items():
            gi = index[gname]
            _, _, n = groups[gi]
            r = [t[0] for t in triplets]
            c = [t[1] for t in triplets]
            v = [t[2] for t in triplets]
            # stored transposed relative to dense terms: (n_params, rows)
            mat = sparse.csr_matrix((v, (c, r)), shape=(n, diag_len))
            terms.append((gi, mat))
        blocks.append(_Block("diag", diag_len, np.asarray(diag_consts, dtype=float), terms))

    comp = _Compiled(groups, m, b, blocks, var_kinds)
    if equalities:
        comp = _eliminate_equalities(comp, equalities, index)
    if require_coverage:
        _check_coverage(comp)
    return comp


def _check_coverage(comp):
    covered = np.zeros(comp.m, dtype=bool)
    for block in comp.blocks:
        for gi, mat in block.terms:
            _, off, n = comp.groups[gi]
            if sparse.issparse(mat):
                nz = np.diff(mat.indptr) > 0
            else:
                nz = np.abs(np.asarray(mat)).sum(axis=1) > 0
            covered[off : off + n] |= nz
    if not covered.all():
        missing = int(np.count_nonzero(~covered))
        raise SdpError(f"{missing} parameters never appear in any constraint")


def _eliminate_equalities(comp, equalities, index):
    """Substitute y = y0 + N z for scalar equalities; merges all groups."""
    rows = np.zeros((len(equalities), comp.m))
    rhs = np.zeros(len(equalities))
    for r, expr in enumerate(equalities):
        rhs[r] = -expr.const
        for name, vec in expr.coefs.items():
            gi = index[name]
            _, off, n = comp.groups[gi]
            rows[r, off : off + n] = vec
    y0, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    if np.max(np.abs(rows @ y0 - rhs)) > 1e-9:
        raise SdpError("equality constraints are inconsistent")
    from scipy.linalg import null_space

    nullsp = null_space(rows)
    mz = nullsp.shape[1]
    if mz == 0:
        raise SdpError("equalities fix all variables; nothing to optimize")

    new_blocks = []
    for block in comp.blocks:
        width = block.size * block.size if block.kind == "dense" else block.size
        full = np.zeros((comp.m, width))
        for gi, mat in block.terms:
            _, off, n = comp.groups[gi]
            full[off : off + n] = mat.toarray() if sparse.issparse(mat) else mat
        const_shift = full.T @ y0
        if block.kind == "dense":
            const = block.const + const_shift.reshape(block.size, block.size)
        else:
            const = block.const + const_shift
        new_blocks.append(_Block(block.kind, block.size, const, [(0, nullsp.T @ full)]))

    new_b = nullsp.T @ comp.b
    merged = _Compiled(
        [("z", 0, mz)], mz, new_b, new_blocks, {"z": ("real", mz)}
    )
    merged.lift = (y0, nullsp, comp, float(comp.b @ y0))  # type: ignore[attr-defined]
    return merged


# ---------------------------------------------------------------------------
# Block linear algebra helpers
# ---------------------------------------------------------------------------

def _apply_terms(mat, dy):
    if sparse.issparse(mat):
        return np.asarray(mat.T @ dy).reshape(-1)
    return dy @ mat


def _inner_terms(mat, vec):
    if sparse.issparse(mat):
        return np.asarray(mat @ vec).reshape(-1)
    return mat @ vec


def _padded_triplets(csr, size):
    """Per-row padded (rows, cols, vals) arrays of shape (n, K) cached on
    the matrix: rows are short (a few entries for Hermitian basis maps)."""
    cached = getattr(csr, "_gmewit_pad", None)
    if cached is not None:
        return cached
    n = csr.shape[0]
    counts = np.diff(csr.indptr)
    k = max(1, int(counts.max()))
    rows = np.zeros((n, k), dtype=np.int64)
    cols = np.zeros((n, k), dtype=np.int64)
    vals = np.zeros((n, k))
    flat_r = csr.indices // size
    flat_c = csr.indices % size
    for i in range(n):
        lo, hi = csr.indptr[i], csr.indptr[i + 1]
        rows[i, : hi - lo] = flat_r[lo:hi]
        cols[i, : hi - lo] = flat_c[lo:hi]
        vals[i, : hi - lo] = csr.data[lo:hi]
    csr._gmewit_pad = (rows, cols, vals)
    return csr._gmewit_pad


def _batched_t(mat, x, sinv, size):
    """Rows: vec of sym(X A_i S^-1) for each parameter i of the group."""
    if sparse.issparse(mat):
        csr = mat.tocsr() if not sparse.isspmatrix_csr(mat) else mat
        rows, cols, vals = _padded_triplets(csr, size)
        n, k = rows.shape
        # T_i = sum_k v_ik X[:, r_ik] (x) Sinv[c_ik, :] as one batched matmul
        xc = x[:, rows.reshape(-1)].reshape(size, n, k).transpose(1, 0, 2)
        b = vals[:, :, None] * sinv[cols.reshape(-1), :].reshape(n, k, size)
        tmp = np.matmul(xc, b)
    else:
        a3 = mat.reshape(-1, size, size)
        tmp = np.matmul(np.matmul(x[None], a3), sinv[None])
    tmp = 0.5 * (tmp + np.transpose(tmp, (0, 2, 1)))
    return tmp.reshape(tmp.shape[0], size * size)


def _mat_x_matT(t_g, mat_h):
    """T_g @ A_h^T with mixed dense/sparse operands."""
    if sparse.issparse(mat_h):
        return (mat_h @ t_g.T).T
    return t_g @ mat_h.T


# ---------------------------------------------------------------------------
# Arrow-structured Schur complement
# ---------------------------------------------------------------------------

class _ArrowSchur:
    def __init__(self, comp: _Compiled):
        self.comp = comp
        ng = len(comp.groups)
        touched = [set() for _ in range(ng)]
        for bi, block in enumerate(comp.blocks):
            for gi, _ in block.terms:
                touched[gi].add(bi)
        adjacent = [set() for _ in range(ng)]
        for block in comp.blocks:
            gs = sorted({gi for gi, _ in block.terms})
            for i in gs:
                for j in gs:
                    if i != j:
                        adjacent[i].add(j)
        # loosely coupled groups first (by adjacency degree, then size):
        # they become the cheap block-diagonal part of the arrow
        order = sorted(
            range(ng), key=lambda g: (len(adjacent[g]), -comp.groups[g][2], g)
        )
        local, corner = [], []
        chosen = set()
        for g in order:
            if adjacent[g] & chosen:
                corner.append(g)
            else:
                local.append(g)
                chosen.add(g)
        self.corner = sorted(corner)
        self.local = sorted(local)
        self.is_local = {g: (g in self.local) for g in range(ng)}
        self.corner_offset = {}
        off = 0
        for g in self.corner:
            self.corner_offset[g] = off
            off += comp.groups[g][2]
        self.n_corner = off

    def zero(self):
        comp = self.comp
        diag = {g: np.zeros((comp.groups[g][2], comp.groups[g][2])) for g in self.local}
        border = {g: np.zeros((comp.groups[g][2], self.n_corner)) for g in self.local}
        corner = np.zeros((self.n_corner, self.n_corner))
        return {"diag": diag, "border": border, "corner": corner}

    def accumulate(self, acc, gi, gj, contrib):
        """Add the (gi, gj) Schur contribution (n_gi x n_gj)."""
        li, lj = self.is_local[gi], self.is_local[gj]
        if li and lj:
            if gi != gj:
                raise SdpError("independent-set invariant violated")
            acc["diag"][gi] += 0.5 * (contrib + contrib.T)
        elif li and not lj:
            off = self.corner_offset[gj]
            acc["border"][gi][:, off : off + contrib.shape[1]] += contrib
        elif lj and not li:
            off = self.corner_offset[gi]
            acc["border"][gj][:, off : off + contrib.shape[0]] += contrib.T
        else:
            oi, oj = self.corner_offset[gi], self.corner_offset[gj]
            acc["corner"][oi : oi + contrib.shape[0], oj : oj + contrib.shape[1]] += contrib
            if gi != gj:
                acc["corner"][oj : oj + contrib.shape[1], oi : oi + contrib.shape[0]] += contrib.T

    def factor(self, acc):
        comp = self.comp
        factors = {}
        corner = acc["corner"].copy()
        corner = 0.5 * (corner + corner.T)
        for g in self.local:
            dmat = acc["diag"][g]
            lg = _safe_cholesky(dmat)
            vg = solve_triangular(lg, acc["border"][g], lower=True, check_finite=False)
            corner -= vg.T @ vg
            factors[g] = (lg, vg)
        lc = _safe_cholesky(0.5 * (corner + corner.T)) if self.n_corner else None
        return factors, lc

    def _solve_once(self, factors, lc, rhs):
        comp = self.comp
        out = np.zeros_like(rhs)
        w = {}
        rc = np.zeros(self.n_corner)
        for g in self.corner:
            _, off, n = comp.groups[g]
            rc[self.corner_offset[g] : self.corner_offset[g] + n] = rhs[off : off + n]
        for g in self.local:
            _, off, n = comp.groups[g]
            lg, vg = factors[g]
            w[g] = solve_triangular(lg, rhs[off : off + n], lower=True, check_finite=False)
            rc -= vg.T @ w[g]
        zc = (
            solve_triangular(
                lc.T,
                solve_triangular(lc, rc, lower=True, check_finite=False),
                lower=False,
                check_finite=False,
            )
            if self.n_corner
            else np.zeros(0)
        )
        for g in self.corner:
            _, off, n = comp.groups[g]
            out[off : off + n] = zc[self.corner_offset[g] : self.corner_offset[g] + n]
        for g in self.local:
            _, off, n = comp.groups[g]
            lg, vg = factors[g]
            out[off : off + n] = solve_triangular(
                lg.T, w[g] - vg @ zc, lower=False, check_finite=False
            )
        return out

    def multiply(self, acc, vec):
        comp = self.comp
        out = np.zeros_like(vec)
        for g in self.local:
            _, off, n = comp.groups[g]
            seg = vec[off : off + n]
            out[off : off + n] += acc["diag"][g] @ seg
            corner_vec = acc["border"][g].T @ seg
            for h in self.corner:
                _, hoff, hn = comp.groups[h]
                co = self.corner_offset[h]
                out[hoff : hoff + hn] += corner_vec[co : co + hn]
        if self.n_corner:
            cvec = np.zeros(self.n_corner)
            for h in self.corner:
                _, hoff, hn = comp.groups[h]
                co = self.corner_offset[h]
                cvec[co : co + hn] = vec[hoff : hoff + hn]
            ccontrib = acc["corner"] @ cvec
            for h in self.corner:
                _, hoff, hn = comp.groups[h]
                co = self.corner_offset[h]
                out[hoff : hoff + hn] += ccontrib[co : co + hn]
            for g in self.local:
                _, off, n = comp.groups[g]
                out[off : off + n] += acc["border"][g] @ cvec
        return out

    def solve(self, acc, factors, lc, rhs, refine=2):
        out = self._solve_once(factors, lc, rhs)
        for _ in range(refine):
            resid = rhs - self.multiply(acc, out)
            if np.max(np.abs(resid)) <= 1e-14 * max(1.0, np.max(np.abs(rhs))):
                break
            out = out + self._solve_once(factors, lc, resid)
        return out


def _safe_cholesky(mat):
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    scale = max(np.trace(mat) / max(mat.shape[0], 1), 1.0)
    eye = np.eye(mat.shape[0])
    for attempt in range(12):
        bump = scale * 10.0 ** (-14 + 2 * attempt)
        try:
            return np.linalg.cholesky(mat + bump * eye)
        except np.linalg.LinAlgError:
            continue
    raise SdpError("Schur complement lost positive definiteness")


# ---------------------------------------------------------------------------
# Interior-point iteration
# ---------------------------------------------------------------------------

def _block_init(block, scale):
    if block.kind == "dense":
        return scale * np.eye(block.size), scale * np.eye(block.size)
    return scale * np.ones(block.size), scale * np.ones(block.size)


def _max_step(current, delta, kind, chol_cache=None):
    """Largest alpha with current + alpha * delta >= 0 (exact for diag)."""
    if kind == "diag":
        neg = delta < 0
        if not np.any(neg):
            return np.inf
        return float(np.min(-current[neg] / delta[neg]))
    lmat = chol_cache if chol_cache is not None else np.linalg.cholesky(current)
    w = solve_triangular(lmat, delta, lower=True, check_finite=False)
    w = solve_triangular(lmat, w.T, lower=True, check_finite=False)
    lam = np.linalg.eigvalsh(0.5 * (w + w.T))[0]
    if lam >= 0:
        return np.inf
    return float(-1.0 / lam)


def solve_compiled(comp: _Compiled, tol=DEFAULT_TOL, max_iterations=DEFAULT_MAX_ITERATIONS):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover - threadpoolctl ships with scipy stacks
        import contextlib

        threadpool_limits = lambda limits: contextlib.nullcontext()
    with threadpool_limits(limits=1):
        return _solve_compiled_inner(comp, tol, max_iterations)


def _solve_compiled_inner(comp, tol, max_iterations):
    m = comp.m
    b = comp.b
    schur = _ArrowSchur(comp)

    norm_b = max(1.0, float(np.max(np.abs(b))))
    norm_c = max(
        [1.0]
        + [
            float(np.max(np.abs(block.const)) if block.const.size else 0.0)
            for block in comp.blocks
        ]
    )
    scale0 = max(10.0, norm_b, norm_c)

    y = np.zeros(m)
    X, S = [], []
    for block in comp.blocks:
        xb, sb = _block_init(block, scale0)
        X.append(xb)
        S.append(sb)

    n_total = sum(block.size for block in comp.blocks)
    trajectory = []
    status = "max_iterations"
    iterations = 0

    for iteration in range(1, max_iterations + 1):
        iterations = iteration
        # residuals
        rd = []  # C + A(y) - S per block
        atx = np.zeros(m)
        mu_sum = 0.0
        dual_obj = 0.0
        for bi, block in enumerate(comp.blocks):
            expr = block.const.copy()
            for gi, mat in block.terms:
                _, off, n = comp.groups[gi]
                contrib = _apply_terms(mat, y[off : off + n])
                expr = expr + (
                    contrib.reshape(block.size, block.size)
                    if block.kind == "dense"
                    else contrib
                )
            rd.append(expr - S[bi])
            if block.kind == "dense":
                xvec = X[bi].reshape(-1)
                for gi, mat in block.terms:
                    _, off, n = comp.groups[gi]
                    atx[off : off + n] += _inner_terms(mat, xvec)
                mu_sum += float(np.tensordot(X[bi], S[bi]))
                dual_obj += float(np.tensordot(block.const, X[bi]))
            else:
                for gi, mat in block.terms:
                    _, off, n = comp.groups[gi]
                    atx[off : off + n] += _inner_terms(mat, X[bi])
                mu_sum += float(X[bi] @ S[bi])
                dual_obj += float(block.const @ X[bi])
        rp = -b - atx  # want A^T(X) = -b
        mu = mu_sum / n_total
        pobj = float(b @ y)
        gap = dual_obj - pobj

        norm_rp = float(np.max(np.abs(rp))) / (1.0 + norm_b)
        norm_rd = max(
            float(np.max(np.abs(r))) if r.size else 0.0 for r in rd
        ) / (1.0 + norm_c)
        trajectory.append(
            {
                "pobj": pobj,
                "dobj": dual_obj,
                "gap": gap,
                "mu": mu,
                "rp": norm_rp,
                "rd": norm_rd,
            }
        )

        gap_target = max(1e-9, min(GAP_CERT, tol * (1.0 + abs(pobj) + abs(dual_obj))))
        if norm_rp <= tol and norm_rd <= tol and abs(gap) <= gap_target:
            status = "optimal"
            break
        if iteration > 12 and len(trajectory) >= 7:
            window = trajectory[-7:]
            settled = all(
                abs(w["pobj"] - pobj) <= 1e-11 * (1.0 + abs(pobj)) for w in window
            )
            if settled and mu <= 1e-9 * (1.0 + abs(pobj)) and norm_rd <= 1e-10:
                break  # degenerate face: value converged, certificate will not

        # infeasibility certificate: X >= 0 with A^T(X) ~ 0 and <C, X> < 0
        xnorm = np.sqrt(
            sum(
                float(np.sum(np.asarray(xb) ** 2))
                for xb in X
            )
        )
        if xnorm > 1e8:
            cx = dual_obj / xnorm
            if float(np.max(np.abs(atx))) / xnorm < 1e-10 and cx < -1e-10:
                status = "infeasible"
                break
        if abs(pobj) > 1e12 * scale0:
            status = "unbounded"
            break

        # factorizations of the current iterates
        s_chol, x_chol, s_inv = [], [], []
        for bi, block in enumerate(comp.blocks):
            if block.kind == "dense":
                ls = _safe_cholesky(S[bi])
                s_chol.append(ls)
                inv = solve_triangular(ls, np.eye(block.size), lower=True, check_finite=False)
                s_inv.append(inv.T @ inv)
                x_chol.append(_safe_cholesky(X[bi]))
            else:
                s_chol.append(None)
                x_chol.append(None)
                s_inv.append(1.0 / S[bi])

        # Schur matrix assembly
        acc = schur.zero()
        t_cache = []
        for bi, block in enumerate(comp.blocks):
            cache = {}
            if block.kind == "dense":
                for gi, mat in block.terms:
                    cache[gi] = _batched_t(mat, X[bi], s_inv[bi], block.size)
                done = set()
                for gi, mat_i in block.terms:
                    for gj, mat_j in block.terms:
                        if (gj, gi) in done or (gi, gj) in done:
                            continue
                        done.add((gi, gj))
                        contrib = _mat_x_matT(cache[gi], mat_j)
                        schur.accumulate(acc, gi, gj, contrib)
            else:
                w = X[bi] * s_inv[bi]
                done = set()
                for gi, mat_i in block.terms:
                    for gj, mat_j in block.terms:
                        if (gj, gi) in done or (gi, gj) in done:
                            continue
                        done.add((gi, gj))
                        wi = mat_i.multiply(w) if sparse.issparse(mat_i) else mat_i * w
                        contrib = np.asarray((wi @ mat_j.T).todense() if sparse.issparse(mat_j) and sparse.issparse(wi) else wi @ mat_j.T)
                        schur.accumulate(acc, gi, gj, contrib)
            t_cache.append(cache)
        factors, lc = schur.factor(acc)

        def solve_direction(rc_blocks):
            rhs = -rp.copy()
            for bi, block in enumerate(comp.blocks):
                if block.kind == "dense":
                    g = (rc_blocks[bi] - X[bi] @ rd[bi]) @ s_inv[bi]
                    g = 0.5 * (g + g.T)
                    gvec = g.reshape(-1)
                    for gi, mat in block.terms:
                        _, off, n = comp.groups[gi]
                        rhs[off : off + n] += _inner_terms(mat, gvec)
                else:
                    g = (rc_blocks[bi] - X[bi] * rd[bi]) * s_inv[bi]
                    for gi, mat in block.terms:
                        _, off, n = comp.groups[gi]
                        rhs[off : off + n] += _inner_terms(mat, g)
            dy = schur.solve(acc, factors, lc, rhs)
            d_s, d_x = [], []
            for bi, block in enumerate(comp.blocks):
                if block.kind == "dense":
                    ady = np.zeros((block.size, block.size))
                else:
                    ady = np.zeros(block.size)
                for gi, mat in block.terms:
                    _, off, n = comp.groups[gi]
                    contrib = _apply_terms(mat, dy[off : off + n])
                    ady = ady + (
                        contrib.reshape(block.size, block.size)
                        if block.kind == "dense"
                        else contrib
                    )
                ds = rd[bi] + ady
                if block.kind == "dense":
                    dx = (rc_blocks[bi] - X[bi] @ ds) @ s_inv[bi]
                    dx = 0.5 * (dx + dx.T)
                else:
                    dx = (rc_blocks[bi] - X[bi] * ds) * s_inv[bi]
                d_s.append(ds)
                d_x.append(dx)
            return dy, d_s, d_x

        # predictor (affine scaling)
        rc_aff = [
            -(X[bi] @ S[bi]) if comp.blocks[bi].kind == "dense" else -(X[bi] * S[bi])
            for bi in range(len(comp.blocks))
        ]
        dy_a, ds_a, dx_a = solve_direction(rc_aff)
        alpha_x = min(
            [1.0]
            + [
                _max_step(X[bi], dx_a[bi], comp.blocks[bi].kind, x_chol[bi])
                for bi in range(len(comp.blocks))
            ]
        )
        alpha_s = min(
            [1.0]
            + [
                _max_step(S[bi], ds_a[bi], comp.blocks[bi].kind, s_chol[bi])
                for bi in range(len(comp.blocks))
            ]
        )
        mu_aff = 0.0
        for bi, block in enumerate(comp.blocks):
            if block.kind == "dense":
                mu_aff += float(
                    np.tensordot(X[bi] + alpha_x * dx_a[bi], S[bi] + alpha_s * ds_a[bi])
                )
            else:
                mu_aff += float(
                    (X[bi] + alpha_x * dx_a[bi]) @ (S[bi] + alpha_s * ds_a[bi])
                )
        mu_aff = max(mu_aff / n_total, 0.0)
        sigma = min(1.0, max((mu_aff / mu) ** 3 if mu > 0 else 0.0, 1e-10))
        if min(alpha_x, alpha_s) < 0.2:
            sigma = max(sigma, 0.5)  # recentre when steps collapse

        # corrector
        rc_corr = []
        for bi, block in enumerate(comp.blocks):
            if block.kind == "dense":
                rc = sigma * mu * np.eye(block.size) - X[bi] @ S[bi] - dx_a[bi] @ ds_a[bi]
            else:
                rc = sigma * mu - X[bi] * S[bi] - dx_a[bi] * ds_a[bi]
            rc_corr.append(rc)
        dy, ds, dx = solve_direction(rc_corr)

        tau = 0.98
        alpha_x = min(
            [1.0]
            + [
                tau * _max_step(X[bi], dx[bi], comp.blocks[bi].kind, x_chol[bi])
                for bi in range(len(comp.blocks))
            ]
        )
        alpha_s = min(
            [1.0]
            + [
                tau * _max_step(S[bi], ds[bi], comp.blocks[bi].kind, s_chol[bi])
                for bi in range(len(comp.blocks))
            ]
        )
        if alpha_x < 1e-12 and alpha_s < 1e-12:
            break
        y = y + alpha_s * dy
        for bi, block in enumerate(comp.blocks):
            X[bi] = X[bi] + alpha_x * dx[bi]
            S[bi] = S[bi] + alpha_s * ds[bi]
            if block.kind == "dense":
                X[bi] = 0.5 * (X[bi] + X[bi].T)
                S[bi] = 0.5 * (S[bi] + S[bi].T)

    last = trajectory[-1]
    info = {
        "y": y,
        "trajectory": trajectory,
        "rp": last["rp"],
        "rd": last["rd"],
        "mu": last["mu"],
        "X_blocks": X,
        "S_blocks": S,
    }
    return y, X, S, status, last, iterations, info


def solve(problem: SdpProblem, tol=DEFAULT_TOL, max_iterations=DEFAULT_MAX_ITERATIONS) -> SdpSolution:
    comp = compile_problem(problem)
    y, X, S, status, last, iterations, info = solve_compiled(comp, tol, max_iterations)

    shift = problem.objective.const
    if hasattr(comp, "lift"):
        y0, nullsp, orig, const_shift = comp.lift  # type: ignore[attr-defined]
        y = y0 + nullsp @ y
        comp = orig
        info["y"] = y
        shift += const_shift

    values = {}
    for name, off, n in comp.groups:
        kind, size = comp.var_kinds[name]
        chunk = y[off : off + n]
        values[name] = params_to_hermitian(chunk, size) if kind == "herm" else chunk.copy()

    gap = last["dobj"] - last["pobj"]
    if status == "optimal" and (abs(gap) > GAP_CERT or last["rp"] > FEAS_CERT or last["rd"] > FEAS_CERT):
        status = "max_iterations"
    return SdpSolution(
        status=status,
        primal_value=last["pobj"] + shift,
        dual_value=last["dobj"] + shift,
        duality_gap=abs(gap),
        variable_values=values,
        iterations=iterations,
        info=info,
    )
