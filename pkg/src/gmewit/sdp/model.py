"""Modeling layer for small dense semidefinite programs.

Variables are complex Hermitian matrices (parametrized by d^2 reals:
diagonal entries, then re/im pairs of the upper triangle) and real vectors.
Affine Hermitian matrix expressions over them form linear matrix
inequalities ``expr >= 0``; scalar affine expressions form bounds,
equalities and the objective.

For the solver everything is compiled to real symmetric blocks via the
embedding  M -> [[Re M, -Im M], [Im M, Re M]],  which is symmetric exactly
when M is Hermitian, so the interior-point core stays real-arithmetic
only.  The objective is kept on the shared real parameter vector, so no
value rescaling is needed on extraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class HermitianVariable:
    name: str
    dim: int  # complex dimension

    @property
    def n_params(self):
        return self.dim * self.dim


@dataclass(frozen=True)
class RealVariable:
    name: str
    size: int

    @property
    def n_params(self):
        return self.size


def params_to_hermitian(values, dim) -> np.ndarray:
    """Back-map from the real parameter vector to a complex Hermitian matrix."""
    values = np.asarray(values, dtype=float)
    mat = np.zeros((dim, dim), dtype=complex)
    mat[np.arange(dim), np.arange(dim)] = values[:dim]
    idx = dim
    for p in range(dim):
        for q in range(p + 1, dim):
            re, im = values[idx], values[idx + 1]
            idx += 2
            mat[p, q] = re + 1j * im
            mat[q, p] = re - 1j * im
    return mat


def hermitian_basis_embedded(dim) -> sparse.csr_matrix:
    """CSR map (n_params, (2 dim)^2): rows are vec of embedded basis matrices."""
    big = 2 * dim

    def at(r, c):
        return r * big + c

    rows, cols, vals = [], [], []
    row = 0
    for p in range(dim):  # diagonal params
        for r, c, v in ((p, p, 1.0), (dim + p, dim + p, 1.0)):
            rows.append(row)
            cols.append(at(r, c))
            vals.append(v)
        row += 1
    for p in range(dim):
        for q in range(p + 1, dim):
            for r, c, v in (
                (p, q, 1.0),
                (q, p, 1.0),
                (dim + p, dim + q, 1.0),
                (dim + q, dim + p, 1.0),
            ):
                rows.append(row)
                cols.append(at(r, c))
                vals.append(v)
            row += 1
            for r, c, v in (
                (p, dim + q, -1.0),
                (dim + q, p, -1.0),
                (q, dim + p, 1.0),
                (dim + p, q, 1.0),
            ):
                rows.append(row)
                cols.append(at(r, c))
                vals.append(v)
            row += 1
    n = dim * dim
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, big * big))


def embed_complex(mat) -> np.ndarray:
    """[[Re, -Im], [Im, Re]]; symmetric iff mat is Hermitian."""
    mat = np.asarray(mat, dtype=complex)
    re, im = mat.real, mat.imag
    top = np.hstack([re, -im])
    bot = np.hstack([im, re])
    return np.vstack([top, bot])


def extract_hermitian(embedded) -> np.ndarray:
    """Average back from the real embedding to a complex Hermitian matrix."""
    embedded = np.asarray(embedded, dtype=float)
    d = embedded.shape[0] // 2
    re = 0.5 * (embedded[:d, :d] + embedded[d:, d:])
    im = 0.5 * (embedded[d:, :d] - embedded[:d, d:])
    mat = re + 1j * im
    return 0.5 * (mat + mat.conj().T)


def _pt_index_map(dim, mask, num_qubits):
    """Partial-transpose permutation of complex indices: returns arrays
    (new_r, new_c) for entry (r, c); mask lists 0-indexed qubit positions."""
    bits = num_qubits

    # swap the masked bits between row and column index
    def swap(r, c):
        rr, cc = r, c
        for b in mask:
            shift = bits - 1 - b
            rb = (r >> shift) & 1
            cb = (c >> shift) & 1
            rr = (rr & ~(1 << shift)) | (cb << shift)
            cc = (cc & ~(1 << shift)) | (rb << shift)
        return rr, cc

    new_r = np.empty((dim, dim), dtype=np.int64)
    new_c = np.empty((dim, dim), dtype=np.int64)
    for r in range(dim):
        for c in range(dim):
            rr, cc = swap(r, c)
            new_r[r, c], new_c[r, c] = rr, cc
    return new_r, new_c


def embedded_pt_permutation(dim, mask, num_qubits) -> sparse.csr_matrix:
    """Permutation on vec space of the embedded matrix realizing the
    partial transpose of the underlying complex matrix."""
    big = 2 * dim
    new_r, new_c = _pt_index_map(dim, mask, num_qubits)
    perm = np.empty(big * big, dtype=np.int64)
    for r in range(dim):
        for c in range(dim):
            rr, cc = new_r[r, c], new_c[r, c]
            # each of the four sub-blocks moves the same way
            perm[r * big + c] = rr * big + cc
            perm[r * big + (dim + c)] = rr * big + (dim + cc)
            perm[(dim + r) * big + c] = (dim + rr) * big + cc
            perm[(dim + r) * big + (dim + c)] = (dim + rr) * big + (dim + cc)
    data = np.ones(big * big)
    # column j of the output is vec position perm[j] of the input
    return sparse.csr_matrix(
        (data, (perm, np.arange(big * big))), shape=(big * big, big * big)
    )


class MatExpr:
    """Affine Hermitian matrix expression: const + sum over variable terms.

    Terms map a variable name to a CSR/ndarray of shape (n_params, (2d)^2)
    holding vecs of the *embedded* per-parameter coefficient matrices.
    """

    def __init__(self, dim, num_qubits=None, const=None, terms=None):
        self.dim = int(dim)
        self.num_qubits = num_qubits
        self.const = (
            np.zeros((dim, dim), dtype=complex) if const is None else np.asarray(const, dtype=complex)
        )
        self.terms = dict(terms or {})

    @classmethod
    def from_hermitian_variable(cls, var: HermitianVariable, num_qubits=None):
        return cls(
            var.dim,
            num_qubits,
            terms={var.name: hermitian_basis_embedded(var.dim)},
        )

    @classmethod
    def from_real_combination(cls, var: RealVariable, matrices, num_qubits=None):
        """sum_n c_n P_n for fixed complex Hermitian matrices P_n."""
        mats = [np.asarray(m, dtype=complex) for m in matrices]
        if len(mats) != var.size:
            raise ValueError("one matrix per coefficient required")
        dim = mats[0].shape[0]
        stack = np.stack([embed_complex(m).reshape(-1) for m in mats])
        return cls(dim, num_qubits, terms={var.name: stack})

    @classmethod
    def constant(cls, mat, num_qubits=None):
        mat = np.asarray(mat, dtype=complex)
        return cls(mat.shape[0], num_qubits, const=mat)

    def copy(self):
        return MatExpr(self.dim, self.num_qubits, self.const.copy(), dict(self.terms))

    def __add__(self, other):
        if isinstance(other, MatExpr):
            if other.dim != self.dim:
                raise ValueError("dimension mismatch")
            out = self.copy()
            out.const = out.const + other.const
            for name, term in other.terms.items():
                if name in out.terms:
                    out.terms[name] = out.terms[name] + term
                else:
                    out.terms[name] = term
            return out
        return self + MatExpr.constant(_as_matrix(other, self.dim), self.num_qubits)

    def __sub__(self, other):
        return self + (-1.0) * (other if isinstance(other, MatExpr) else MatExpr.constant(_as_matrix(other, self.dim)))

    def __rmul__(self, scalar):
        out = self.copy()
        out.const = scalar * out.const
        out.terms = {k: scalar * v if isinstance(v, np.ndarray) else (v * scalar) for k, v in out.terms.items()}
        return out

    def __neg__(self):
        return (-1.0) * self

    def partial_transpose(self, mask):
        """Partial transpose over the 0-indexed qubit positions in mask."""
        if self.num_qubits is None:
            raise ValueError("partial transpose needs the qubit structure")
        perm = embedded_pt_permutation(self.dim, tuple(sorted(mask)), self.num_qubits)
        out = MatExpr(self.dim, self.num_qubits)
        from ..states import Bipartition, partial_transpose as pt_matrix

        sites = tuple(b + 1 for b in sorted(mask))
        out.const = pt_matrix(self.const, Bipartition(sites, self.num_qubits))
        out.terms = {k: v @ perm.T for k, v in self.terms.items()}
        return out


def _as_matrix(value, dim):
    if np.isscalar(value):
        return value * np.eye(dim, dtype=complex)
    return np.asarray(value, dtype=complex)


class ScalarExpr:
    """Affine real-valued expression: const + sum of coefficient vectors."""

    def __init__(self, const=0.0, coefs=None):
        self.const = float(const)
        self.coefs = dict(coefs or {})

    @classmethod
    def of_real_variable(cls, var: RealVariable, weights):
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (var.size,):
            raise ValueError("weight length mismatch")
        return cls(0.0, {var.name: weights})

    @classmethod
    def trace_product(cls, expr: MatExpr, rho):
        """Tr(expr * rho) for a fixed Hermitian rho (real by Hermiticity)."""
        rho = np.asarray(rho, dtype=complex)
        target = embed_complex(rho).reshape(-1) * 0.5  # halve the doubled trace
        coefs = {}
        for name, term in expr.terms.items():
            vec = term @ target
            coefs[name] = np.asarray(vec, dtype=float).reshape(-1)
        const = float(np.real(np.trace(expr.const @ rho)))
        return cls(const, coefs)

    def __add__(self, other):
        if np.isscalar(other):
            return ScalarExpr(self.const + float(other), self.coefs)
        out = ScalarExpr(self.const + other.const, dict(self.coefs))
        for name, vec in other.coefs.items():
            out.coefs[name] = out.coefs.get(name, 0.0) + vec
        return out

    def __rmul__(self, scalar):
        return ScalarExpr(scalar * self.const, {k: scalar * v for k, v in self.coefs.items()})

    def __neg__(self):
        return (-1.0) * self

    def __sub__(self, other):
        if np.isscalar(other):
            return self + (-float(other))
        return self + (-1.0) * other


@dataclass
class LmiConstraint:
    expr: MatExpr  # expr >= 0


@dataclass
class ScalarBound:
    expr: ScalarExpr  # expr >= 0


@dataclass
class ScalarEquality:
    expr: ScalarExpr  # expr == 0


class SdpProblem:
    """Small dense SDP over Hermitian matrix and real vector variables."""

    def __init__(self, name="sdp"):
        self.name = name
        self.variables = {}
        self._order = []
        self.constraints = []
        self.objective = ScalarExpr()

    # -- variables ---------------------------------------------------------
    def hermitian_variable(self, name, dim) -> HermitianVariable:
        var = HermitianVariable(name, int(dim))
        self._register(var)
        return var

    def real_variable(self, name, size, lower=None, upper=None) -> RealVariable:
        var = RealVariable(name, int(size))
        self._register(var)
        self._add_box(var, lower, upper)
        return var

    def _add_box(self, var, lower, upper):
        if lower is not None:
            self.constraints.append(("box_lower", var.name, float(lower)))
        if upper is not None:
            self.constraints.append(("box_upper", var.name, float(upper)))

    def _register(self, var):
        if var.name in self.variables:
            raise ValueError(f"duplicate variable {var.name!r}")
        self.variables[var.name] = var
        self._order.append(var.name)

    # -- constraints ---------------------------------------------------------
    def add_lmi(self, expr: MatExpr):
        self.constraints.append(LmiConstraint(expr))

    def add_scalar_bound(self, expr: ScalarExpr):
        """expr >= 0"""
        self.constraints.append(ScalarBound(expr))

    def add_equality(self, expr: ScalarExpr):
        """expr == 0"""
        self.constraints.append(ScalarEquality(expr))

    def maximize(self, expr: ScalarExpr):
        self.objective = expr

    def minimize(self, expr: ScalarExpr):
        self.objective = -expr
