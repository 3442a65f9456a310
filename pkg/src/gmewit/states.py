"""Pauli algebra, pure states, density matrices and the standard reference states.

Conventions used throughout the package:

* Qubit sites are 1-indexed.  Qubit 1 is the *most significant* bit of the
  amplitude index, and bit value 1 denotes the state ``|1>``.  The basis
  state ``|b1 b2 ... bN>`` therefore sits at index ``sum(b_i * 2**(N-i))``.
* The Pauli ``Z`` operator follows the trapped-ion sign convention
  ``Z|0> = -|0>`` and ``Z|1> = +|1>``, i.e. ``Z = diag(-1, +1)``.  ``Y`` is
  chosen so that the algebra ``XY = iZ`` (and cyclic) still closes; this is
  the ordinary Pauli algebra written in a relabelled basis, so every
  spectral or entanglement property is unaffected.
* Measurement outcome bit ``b`` of an axis corresponds to the eigenvalue
  ``+1`` if ``b == 1`` and ``-1`` if ``b == 0``.  In the ``Z`` basis an
  outcome bitstring is then literally the computational basis label.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Dense vectors/matrices are only materialised up to this register size.
DENSE_QUBIT_LIMIT = 12

_HERMITICITY_TOL = 1e-10
_TRACE_TOL = 1e-10
_EIGENVALUE_FLOOR = -1e-9
_NORM_TOL = 1e-9


class PauliAxis(Enum):
    """Single-qubit operator label.  I is only used inside operator strings."""

    I = "I"
    X = "X"
    Y = "Y"
    Z = "Z"

    def __str__(self):
        return self.value


_I2 = np.eye(2, dtype=complex)
_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_Y = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)
_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)

PAULI_MATRICES = {
    PauliAxis.I: _I2,
    PauliAxis.X: _X,
    PauliAxis.Y: _Y,
    PauliAxis.Z: _Z,
}

# Eigenvectors per axis, indexed by outcome bit (bit 1 <-> eigenvalue +1).
_SQ2 = 1.0 / math.sqrt(2.0)
AXIS_EIGENVECTORS = {
    PauliAxis.X: (
        np.array([_SQ2, -_SQ2], dtype=complex),
        np.array([_SQ2, _SQ2], dtype=complex),
    ),
    PauliAxis.Y: (
        np.array([_SQ2, 1.0j * _SQ2], dtype=complex),
        np.array([_SQ2, -1.0j * _SQ2], dtype=complex),
    ),
    PauliAxis.Z: (
        np.array([1.0, 0.0], dtype=complex),
        np.array([0.0, 1.0], dtype=complex),
    ),
}


def axis_from_label(label) -> PauliAxis:
    if isinstance(label, PauliAxis):
        return label
    return PauliAxis(str(label).upper())


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Pauli operators with a real prefactor."""

    ops: tuple
    coefficient: float = 1.0

    def __post_init__(self):
        ops = tuple(axis_from_label(o) for o in self.ops)
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @classmethod
    def two_site(cls, num_qubits, site_i, axis_i, site_j, axis_j, coefficient=1.0):
        """Operator acting as axis_i on site_i and axis_j on site_j (1-indexed)."""
        if site_i == site_j:
            raise ValueError("two_site requires distinct sites")
        ops = [PauliAxis.I] * num_qubits
        ops[site_i - 1] = axis_from_label(axis_i)
        ops[site_j - 1] = axis_from_label(axis_j)
        return cls(tuple(ops), coefficient)

    @classmethod
    def single_site(cls, num_qubits, site, axis, coefficient=1.0):
        ops = [PauliAxis.I] * num_qubits
        ops[site - 1] = axis_from_label(axis)
        return cls(tuple(ops), coefficient)

    @property
    def num_qubits(self):
        return len(self.ops)

    def support(self):
        """1-indexed sites where the string acts non-trivially."""
        return tuple(i + 1 for i, o in enumerate(self.ops) if o is not PauliAxis.I)


def anticommutes(a: PauliString, b: PauliString) -> bool:
    """Two Pauli strings anticommute iff they differ on an odd number of
    sites where both act non-trivially."""
    if a.num_qubits != b.num_qubits:
        raise ValueError("operator length mismatch")
    clashes = sum(
        1
        for oa, ob in zip(a.ops, b.ops)
        if oa is not PauliAxis.I and ob is not PauliAxis.I and oa is not ob
    )
    return clashes % 2 == 1


def pairwise_anticommuting(strings) -> bool:
    """Check that every pair in the collection anticommutes (Pauli rule)."""
    strings = list(strings)
    return all(
        anticommutes(strings[i], strings[j])
        for i in range(len(strings))
        for j in range(i + 1, len(strings))
    )


def pauli_string_matrix(p: PauliString) -> np.ndarray:
    """Dense matrix of a Pauli string (coefficient included)."""
    n = p.num_qubits
    if n > DENSE_QUBIT_LIMIT:
        raise ValueError(
            f"dense realization capped at {DENSE_QUBIT_LIMIT} qubits, got {n}"
        )
    out = np.array([[p.coefficient]], dtype=complex)
    for op in p.ops:
        out = np.kron(out, PAULI_MATRICES[op])
    return out


@dataclass(frozen=True)
class PureState:
    """Normalized N-qubit state vector (qubit 1 = most significant bit)."""

    amplitudes: np.ndarray
    num_qubits: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        dim = 1 << self.num_qubits
        if amps.shape[0] != dim:
            raise ValueError(f"expected {dim} amplitudes, got {amps.shape[0]}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"state norm {norm} deviates from 1 beyond {_NORM_TOL}")
        # Renormalize exactly so downstream float noise does not accumulate.
        amps = amps / norm
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = int(round(math.log2(amps.shape[0])))
        if 1 << n != amps.shape[0]:
            raise ValueError("amplitude vector length is not a power of two")
        return cls(amps, n)

    @classmethod
    def from_bitstring(cls, bits) -> "PureState":
        bits = _as_bits(bits)
        n = len(bits)
        amps = np.zeros(1 << n, dtype=complex)
        amps[bits_to_index(bits)] = 1.0
        return cls(amps, n)

    def density_matrix(self) -> "DensityMatrix":
        amps = self.amplitudes
        return DensityMatrix(np.outer(amps, amps.conj()), self.num_qubits)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, trace-one, (numerically) positive matrix on k qubits."""

    matrix: np.ndarray
    num_qubits: int

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        dim = 1 << self.num_qubits
        if mat.shape != (dim, dim):
            raise ValueError(f"expected {dim}x{dim} matrix, got {mat.shape}")
        herm = np.max(np.abs(mat - mat.conj().T))
        if herm > _HERMITICITY_TOL:
            raise ValueError(f"matrix is not Hermitian (deviation {herm:.2e})")
        tr = mat.trace()
        if abs(tr - 1.0) > _TRACE_TOL:
            raise ValueError(f"trace {tr} deviates from 1")
        mat = 0.5 * (mat + mat.conj().T)
        lo = float(np.linalg.eigvalsh(mat)[0])
        if lo < _EIGENVALUE_FLOOR:
            raise ValueError(f"minimum eigenvalue {lo:.2e} below the PSD floor")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def to_json(self) -> str:
        flat = self.matrix.reshape(-1)
        pairs = [[float(z.real), float(z.imag)] for z in flat]
        return json.dumps({"num_qubits": self.num_qubits, "matrix": pairs})

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        payload = json.loads(text)
        k = int(payload["num_qubits"])
        dim = 1 << k
        pairs = payload["matrix"]
        if len(pairs) != dim * dim:
            raise ValueError("serialized matrix has the wrong number of entries")
        flat = np.array([complex(re, im) for re, im in pairs])
        return cls(flat.reshape(dim, dim), k)


@dataclass(frozen=True)
class Bipartition:
    """A cut A | complement of the sites {1..k}; canonical form has 1 in A."""

    side_a: tuple
    num_qubits: int

    def __post_init__(self):
        sides = tuple(sorted(set(int(s) for s in self.side_a)))
        if not sides:
            raise ValueError("side A must be non-empty")
        if any(s < 1 or s > self.num_qubits for s in sides):
            raise ValueError("site out of range")
        if len(sides) >= self.num_qubits:
            raise ValueError("side A must be a proper subset")
        if 1 not in sides:
            sides = tuple(
                s for s in range(1, self.num_qubits + 1) if s not in sides
            )
        object.__setattr__(self, "side_a", sides)

    @property
    def side_b(self):
        return tuple(
            s for s in range(1, self.num_qubits + 1) if s not in self.side_a
        )


def all_bipartitions(num_qubits):
    """All 2^(k-1) - 1 distinct bipartitions of {1..k} in canonical form."""
    rest = list(range(2, num_qubits + 1))
    parts = []
    for r in range(0, num_qubits - 1):
        for extra in itertools.combinations(rest, r):
            parts.append(Bipartition((1,) + extra, num_qubits))
    return parts


def bits_to_index(bits) -> int:
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


def index_to_bits(index, num_qubits):
    return tuple((index >> (num_qubits - 1 - i)) & 1 for i in range(num_qubits))


def _as_bits(bits):
    if isinstance(bits, str):
        return tuple(int(ch) for ch in bits)
    return tuple(int(b) for b in bits)


# ---------------------------------------------------------------------------
# Reductions and partial transposition
# ---------------------------------------------------------------------------

def reduce(state, sites) -> DensityMatrix:
    """Partial trace onto the given (ordered, 1-indexed) sites.

    Accepts a PureState, a DensityMatrix, or any object exposing
    ``reduce(sites)`` itself (mixture handles from the dynamics layer).
    """
    sites = tuple(int(s) for s in sites)
    if len(sites) == 0:
        raise ValueError("site list must be non-empty")
    if len(set(sites)) != len(sites):
        raise ValueError("sites must be distinct")

    if isinstance(state, PureState):
        n = state.num_qubits
        _check_sites(sites, n)
        keep = [s - 1 for s in sites]
        drop = [i for i in range(n) if i not in keep]
        tensor = state.tensor()
        perm = keep + drop
        m = np.transpose(tensor, perm).reshape(1 << len(keep), 1 << len(drop))
        rho = m @ m.conj().T
        return DensityMatrix(rho, len(sites))

    if isinstance(state, DensityMatrix):
        n = state.num_qubits
        _check_sites(sites, n)
        keep = [s - 1 for s in sites]
        drop = [i for i in range(n) if i not in keep]
        t = state.matrix.reshape((2,) * (2 * n))
        perm = keep + drop + [n + i for i in keep] + [n + i for i in drop]
        t = np.transpose(t, perm)
        dk, dd = 1 << len(keep), 1 << len(drop)
        t = t.reshape(dk, dd, dk, dd)
        rho = np.einsum("abcb->ac", t)
        return DensityMatrix(rho, len(sites))

    if hasattr(state, "reduce"):
        return state.reduce(sites)
    raise TypeError(f"cannot reduce object of type {type(state)!r}")


def _check_sites(sites, num_qubits):
    if any(s < 1 or s > num_qubits for s in sites):
        raise ValueError(f"sites {sites} outside register 1..{num_qubits}")


def partial_transpose(rho, part: Bipartition) -> np.ndarray:
    """Transpose the tensor factors in side A of the bipartition.

    Returns a plain Hermitian ndarray: the result is generally not positive.
    """
    if isinstance(rho, DensityMatrix):
        mat, n = rho.matrix, rho.num_qubits
    else:
        mat = np.asarray(rho, dtype=complex)
        n = int(round(math.log2(mat.shape[0])))
    if part.num_qubits != n:
        raise ValueError("bipartition size does not match the state")
    t = mat.reshape((2,) * (2 * n))
    perm = list(range(2 * n))
    for s in part.side_a:
        i = s - 1
        perm[i], perm[n + i] = perm[n + i], perm[i]
    return np.transpose(t, perm).reshape(mat.shape).copy()


def negativity(rho, part: Bipartition) -> float:
    """Absolute sum of the negative eigenvalues of the partial transpose."""
    pt = partial_transpose(rho, part)
    eigs = np.linalg.eigvalsh(pt)
    return float(-eigs[eigs < 0.0].sum())


def negativity_trace_norm(rho, part: Bipartition) -> float:
    """(||rho^T_A||_1 - 1) / 2, numerically equal to ``negativity``."""
    pt = partial_transpose(rho, part)
    eigs = np.linalg.eigvalsh(pt)
    return float((np.abs(eigs).sum() - 1.0) / 2.0)


def uhlmann_fidelity(rho, psi: PureState) -> float:
    """Fidelity with a pure state, <psi|rho|psi>."""
    if isinstance(rho, DensityMatrix):
        mat = rho.matrix
        if rho.num_qubits != psi.num_qubits:
            raise ValueError("dimension mismatch")
    else:
        mat = np.asarray(rho, dtype=complex)
        if mat.shape[0] != psi.amplitudes.shape[0]:
            raise ValueError("dimension mismatch")
    v = psi.amplitudes
    return float(np.real(v.conj() @ mat @ v))


def expectation(state, p: PauliString) -> float:
    """<P> on a PureState, DensityMatrix or mixture handle."""
    if isinstance(state, PureState):
        v = state.amplitudes
        w = apply_pauli_string(p, v, state.num_qubits)
        return float(np.real(v.conj() @ w)) * 1.0
    if isinstance(state, DensityMatrix):
        if p.num_qubits != state.num_qubits:
            raise ValueError("operator length mismatch")
        mat = pauli_string_matrix(p)
        return float(np.real(np.trace(state.matrix @ mat)))
    if hasattr(state, "expectation"):
        return state.expectation(p)
    raise TypeError(f"cannot take expectation on {type(state)!r}")


def apply_pauli_string(p: PauliString, amplitudes, num_qubits) -> np.ndarray:
    """Apply a Pauli string to an amplitude vector site by site."""
    if p.num_qubits != num_qubits:
        raise ValueError("operator length mismatch")
    t = np.asarray(amplitudes, dtype=complex).reshape((2,) * num_qubits)
    for i, op in enumerate(p.ops):
        if op is PauliAxis.I:
            continue
        t = np.tensordot(PAULI_MATRICES[op], t, axes=([1], [i]))
        t = np.moveaxis(t, 0, i)
    return p.coefficient * t.reshape(-1)


# ---------------------------------------------------------------------------
# Named reference states
# ---------------------------------------------------------------------------

def named_state(kind: str, num_qubits: int, excitations: int | None = None) -> PureState:
    """Canonical reference states with uniform positive real amplitudes.

    kind: ghz | w | dicke | neel | bell_phi_plus | bell_phi_minus |
          bell_psi_plus | bell_psi_minus
    """
    kind = kind.lower()
    n = int(num_qubits)
    if n > DENSE_QUBIT_LIMIT:
        raise ValueError(f"dense states capped at {DENSE_QUBIT_LIMIT} qubits")
    dim = 1 << n

    if kind == "ghz":
        amps = np.zeros(dim, dtype=complex)
        amps[0] = amps[dim - 1] = 1.0 / math.sqrt(2.0)
        return PureState(amps, n)
    if kind == "w":
        return named_state("dicke", n, 1)
    if kind == "dicke":
        if excitations is None:
            raise ValueError("dicke requires the excitation number")
        m = int(excitations)
        if not 0 <= m <= n:
            raise ValueError("excitations must satisfy 0 <= m <= k")
        amps = np.zeros(dim, dtype=complex)
        hits = [
            bits_to_index(bits)
            for bits in itertools.product((0, 1), repeat=n)
            if sum(bits) == m
        ]
        amps[hits] = 1.0 / math.sqrt(len(hits))
        return PureState(amps, n)
    if kind == "neel":
        bits = tuple((i + 1) % 2 for i in range(n))  # |1,0,1,0,...>
        return PureState.from_bitstring(bits)
    if kind.startswith("bell_"):
        if n != 2:
            raise ValueError("Bell states are 2-qubit states")
        amps = np.zeros(4, dtype=complex)
        s = 1.0 / math.sqrt(2.0)
        if kind == "bell_phi_plus":
            amps[0b00], amps[0b11] = s, s
        elif kind == "bell_phi_minus":
            amps[0b00], amps[0b11] = s, -s
        elif kind == "bell_psi_plus":
            amps[0b01], amps[0b10] = s, s
        elif kind == "bell_psi_minus":
            amps[0b01], amps[0b10] = s, -s
        else:
            raise ValueError(f"unknown Bell state {kind!r}")
        return PureState(amps, 2)
    raise ValueError(f"unknown state kind {kind!r}")


# ---------------------------------------------------------------------------
# Generalized Bloch decomposition of 2-qubit states
# ---------------------------------------------------------------------------

_BLOCH_AXES = (PauliAxis.X, PauliAxis.Y, PauliAxis.Z)


@dataclass(frozen=True)
class BlochDecomposition:
    """rho = (1 + a.sigma x 1 + 1 x b.sigma + sum_ij t_ij sigma_i x sigma_j) / 4"""

    bloch_a: np.ndarray
    bloch_b: np.ndarray
    corr: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bloch_a", np.asarray(self.bloch_a, dtype=float))
        object.__setattr__(self, "bloch_b", np.asarray(self.bloch_b, dtype=float))
        object.__setattr__(self, "corr", np.asarray(self.corr, dtype=float))

    def purity(self) -> float:
        return float(
            (
                1.0
                + self.bloch_a @ self.bloch_a
                + self.bloch_b @ self.bloch_b
                + np.sum(self.corr**2)
            )
            / 4.0
        )


def bloch_decompose(rho: DensityMatrix) -> BlochDecomposition:
    if rho.num_qubits != 2:
        raise ValueError("Bloch decomposition is defined for 2-qubit states")
    a = np.zeros(3)
    b = np.zeros(3)
    t = np.zeros((3, 3))
    for i, ax in enumerate(_BLOCH_AXES):
        a[i] = expectation(rho, PauliString.single_site(2, 1, ax))
        b[i] = expectation(rho, PauliString.single_site(2, 2, ax))
        for j, bx in enumerate(_BLOCH_AXES):
            t[i, j] = expectation(rho, PauliString.two_site(2, 1, ax, 2, bx))
    return BlochDecomposition(a, b, t)


def bloch_compose(decomp: BlochDecomposition) -> np.ndarray:
    """Rebuild the 4x4 matrix from Bloch coefficients (may be unphysical)."""
    out = np.eye(4, dtype=complex)
    for i, ax in enumerate(_BLOCH_AXES):
        out += decomp.bloch_a[i] * np.kron(PAULI_MATRICES[ax], _I2)
        out += decomp.bloch_b[i] * np.kron(_I2, PAULI_MATRICES[ax])
        for j, bx in enumerate(_BLOCH_AXES):
            out += decomp.corr[i, j] * np.kron(
                PAULI_MATRICES[ax], PAULI_MATRICES[bx]
            )
    return out / 4.0
