"""Long-range XY chain: couplings, time evolution and the mixed initial state.

The Hamiltonian is

    H = sum_{i<j} J_ij (s+_i s-_j + s-_i s+_j) + B sum_j Z_j

with J_ij = j0 * g_i * g_j / |i-j|**alpha (rad/ms), Z in the inverted sign
convention of :mod:`gmewit.states` and s+ = |1><0|.  The hopping term
conserves the number of excitations (qubits in |1>), so product initial
states evolve inside a single sector of dimension C(N, m); large registers
are only ever touched through that sector representation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .states import DENSE_QUBIT_LIMIT, DensityMatrix, PureState, index_to_bits

KRYLOV_MAX_SUBSPACE = 30
KRYLOV_STEP_BUDGET = 10.0  # max ||H|| * dt per Lanczos step
KRYLOV_TOL = 1e-9


class KrylovConvergenceError(RuntimeError):
    """Raised when the Lanczos propagator cannot reach its tolerance."""


@dataclass(frozen=True)
class CouplingModel:
    """Parameters generating the coupling matrix of the XY chain."""

    num_qubits: int
    alpha: float = 1.1
    j0: float = 1.0  # rad/ms
    envelope: tuple = None
    b_field: float = 0.0  # rad/ms

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.j0 <= 0:
            raise ValueError("j0 must be positive")
        env = self.envelope
        if env is None:
            env = (1.0,) * self.num_qubits
        env = tuple(float(g) for g in env)
        if len(env) != self.num_qubits:
            raise ValueError("envelope length must equal the register size")
        if any(g <= 0 for g in env):
            raise ValueError("envelope entries must be positive")
        object.__setattr__(self, "envelope", env)


def gaussian_envelope(num_qubits, centre_amplitude=1.0, width=6.0):
    """Beam-profile envelope: g_i = 1 + (A - 1) exp(-(i - c)^2 / (2 w^2))."""
    centre = (num_qubits + 1) / 2.0
    sites = np.arange(1, num_qubits + 1, dtype=float)
    g = 1.0 + (centre_amplitude - 1.0) * np.exp(
        -((sites - centre) ** 2) / (2.0 * width**2)
    )
    return tuple(float(x) for x in g)


def coupling_matrix(model: CouplingModel) -> np.ndarray:
    n = model.num_qubits
    g = np.asarray(model.envelope)
    j = np.zeros((n, n))
    for i in range(n):
        for k in range(i + 1, n):
            j[i, k] = j[k, i] = model.j0 * g[i] * g[k] / abs(i - k) ** model.alpha
    return j


# ---------------------------------------------------------------------------
# Sector representation
# ---------------------------------------------------------------------------

def sector_basis(num_qubits, excitations) -> np.ndarray:
    """Ascending integer labels of all bitstrings with the given weight."""
    states = [
        sum(1 << (num_qubits - 1 - p) for p in ones)
        for ones in itertools.combinations(range(num_qubits), excitations)
    ]
    return np.array(sorted(states), dtype=np.int64)


@dataclass(frozen=True)
class SectorState:
    """Amplitudes over the canonical (lexicographic) fixed-excitation basis."""

    num_qubits: int
    excitations: int
    amplitudes: np.ndarray
    basis: np.ndarray = field(default=None)

    def __post_init__(self):
        basis = self.basis
        if basis is None:
            basis = sector_basis(self.num_qubits, self.excitations)
        basis = np.asarray(basis, dtype=np.int64)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != basis.shape[0]:
            raise ValueError("amplitude length does not match the sector dimension")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"sector state norm {norm} deviates from 1")
        amps = amps / norm
        amps.setflags(write=False)
        basis.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def from_bitstring(cls, bits) -> "SectorState":
        if isinstance(bits, str):
            bits = tuple(int(b) for b in bits)
        n, m = len(bits), sum(bits)
        basis = sector_basis(n, m)
        amps = np.zeros(basis.shape[0], dtype=complex)
        label = sum(b << (n - 1 - i) for i, b in enumerate(bits))
        amps[np.searchsorted(basis, label)] = 1.0
        return cls(n, m, amps, basis)

    def to_pure_state(self) -> PureState:
        if self.num_qubits > DENSE_QUBIT_LIMIT:
            raise ValueError("dense conversion capped at the dense qubit limit")
        amps = np.zeros(1 << self.num_qubits, dtype=complex)
        amps[self.basis] = self.amplitudes
        return PureState(amps, self.num_qubits)


class SectorHamiltonian:
    """Matrix-free H restricted to one excitation sector (sparse under the hood)."""

    def __init__(self, model: CouplingModel, excitations: int):
        from scipy import sparse

        self.model = model
        self.excitations = excitations
        n = model.num_qubits
        self.basis = sector_basis(n, excitations)
        dim = self.basis.shape[0]
        index = {int(s): i for i, s in enumerate(self.basis)}
        j = coupling_matrix(model)

        rows, cols, vals = [], [], []
        for a, s in enumerate(self.basis):
            s = int(s)
            for i in range(n):
                bi = (s >> (n - 1 - i)) & 1
                for k in range(i + 1, n):
                    bk = (s >> (n - 1 - k)) & 1
                    if bi == bk or j[i, k] == 0.0:
                        continue
                    t = s ^ (1 << (n - 1 - i)) ^ (1 << (n - 1 - k))
                    rows.append(index[t])
                    cols.append(a)
                    vals.append(j[i, k])
        self._hop = sparse.csr_matrix(
            (vals, (rows, cols)), shape=(dim, dim), dtype=float
        )
        self.field_shift = model.b_field * (2 * excitations - n)
        # Row-sum bound on the spectral radius, used to split Lanczos steps.
        hop_bound = np.max(np.abs(self._hop).sum(axis=1)) if dim > 1 else 0.0
        self.norm_bound = float(hop_bound) + abs(self.field_shift)

    @property
    def dim(self):
        return self.basis.shape[0]

    def matvec(self, vec):
        return self._hop @ vec + self.field_shift * vec


def dense_hamiltonian(model: CouplingModel) -> np.ndarray:
    """Full 2^N Hamiltonian matrix (small registers only)."""
    n = model.num_qubits
    if n > DENSE_QUBIT_LIMIT:
        raise ValueError("dense Hamiltonian capped at the dense qubit limit")
    dim = 1 << n
    j = coupling_matrix(model)
    h = np.zeros((dim, dim), dtype=complex)
    for s in range(dim):
        bits = index_to_bits(s, n)
        h[s, s] = model.b_field * (2 * sum(bits) - n)
        for i in range(n):
            for k in range(i + 1, n):
                if bits[i] != bits[k] and j[i, k] != 0.0:
                    t = s ^ (1 << (n - 1 - i)) ^ (1 << (n - 1 - k))
                    h[t, s] += j[i, k]
    return h


def hamiltonian_apply(model: CouplingModel, state) -> np.ndarray:
    """Coefficients of H|psi> in the basis of the input representation.

    The result is generally unnormalized, so a plain array is returned
    rather than a state object.
    """
    if isinstance(state, PureState):
        h = dense_hamiltonian(model)
        return h @ state.amplitudes
    if isinstance(state, SectorState):
        ham = SectorHamiltonian(model, state.excitations)
        return ham.matvec(state.amplitudes)
    raise TypeError(f"cannot apply Hamiltonian to {type(state)!r}")


# ---------------------------------------------------------------------------
# Time evolution
# ---------------------------------------------------------------------------

def _lanczos_expm_step(matvec, v, t, max_krylov):
    """One Lanczos approximation of exp(-i t H) v; returns (u, err_estimate)."""
    dim = v.shape[0]
    m_max = min(max_krylov, dim)
    vecs = np.zeros((m_max, dim), dtype=complex)
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max - 1) if m_max > 1 else np.zeros(0)
    vecs[0] = v
    happy = False
    m = m_max
    last_b = 0.0
    for j in range(m_max):
        w = matvec(vecs[j])
        alpha[j] = np.real(np.vdot(vecs[j], w))
        # full reorthogonalization: the subspace is tiny, stability is cheap
        for i in range(j + 1):
            w = w - np.vdot(vecs[i], w) * vecs[i]
        last_b = np.linalg.norm(w)
        if j + 1 == m_max:
            break
        if last_b < 1e-13:
            happy = True
            m = j + 1
            break
        beta[j] = last_b
        vecs[j + 1] = w / last_b
    tmat = np.diag(alpha[:m])
    if m > 1:
        tmat += np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
    evals, evecs = np.linalg.eigh(tmat)
    phases = np.exp(-1j * t * evals)
    small = evecs @ (phases * evecs[0].conj())
    u = small @ vecs[:m]
    err = 0.0 if (happy or m == dim) else abs(last_b * small[m - 1] * t)
    return u, err


def _krylov_propagate(ham: SectorHamiltonian, amps, t, tol=KRYLOV_TOL,
                      max_krylov=KRYLOV_MAX_SUBSPACE):
    if t == 0.0:
        return amps.copy()
    steps = max(1, int(math.ceil(abs(t) * max(ham.norm_bound, 1e-30) / KRYLOV_STEP_BUDGET)))
    v = amps.astype(complex)
    dt = t / steps
    for _ in range(steps):
        v = _propagate_adaptive(ham.matvec, v, dt, tol, max_krylov, depth=0)
        v = v / np.linalg.norm(v)
    return v


def _propagate_adaptive(matvec, v, dt, tol, max_krylov, depth):
    u, err = _lanczos_expm_step(matvec, v, dt, max_krylov)
    if err <= tol:
        return u
    if depth >= 12:
        raise KrylovConvergenceError(
            f"Lanczos error estimate {err:.2e} above {tol:.1e} at max subspace "
            f"size {max_krylov}"
        )
    half = _propagate_adaptive(matvec, v, dt / 2, tol, max_krylov, depth + 1)
    half = half / np.linalg.norm(half)
    return _propagate_adaptive(matvec, half, dt / 2, tol, max_krylov, depth + 1)


class QuenchSimulator:
    """Caches diagonalizations / sector operators of one coupling model."""

    def __init__(self, model: CouplingModel):
        self.model = model
        self._dense_eig = None
        self._sector_ops = {}

    def dense_eig(self):
        if self._dense_eig is None:
            h = dense_hamiltonian(self.model)
            self._dense_eig = np.linalg.eigh(h)
        return self._dense_eig

    def sector_op(self, excitations) -> SectorHamiltonian:
        if excitations not in self._sector_ops:
            self._sector_ops[excitations] = SectorHamiltonian(self.model, excitations)
        return self._sector_ops[excitations]

    def evolve(self, state, t):
        if t < 0:
            raise ValueError("evolution time must be nonnegative")
        if isinstance(state, PureState):
            evals, evecs = self.dense_eig()
            coeff = evecs.conj().T @ state.amplitudes
            amps = evecs @ (np.exp(-1j * evals * t) * coeff)
            return PureState(amps, state.num_qubits)
        if isinstance(state, SectorState):
            ham = self.sector_op(state.excitations)
            amps = _krylov_propagate(ham, state.amplitudes, t)
            return SectorState(state.num_qubits, state.excitations, amps, state.basis)
        raise TypeError(f"cannot evolve {type(state)!r}")


def evolve(model: CouplingModel, state, t):
    """Unitary evolution exp(-i H t) of a pure or sector state (t in ms)."""
    return QuenchSimulator(model).evolve(state, t)


def magnetization(state) -> np.ndarray:
    """Vector of <Z_i> (inverted Z convention: |1> carries +1)."""
    if isinstance(state, PureState):
        probs = np.abs(state.amplitudes) ** 2
        n = state.num_qubits
        labels = np.arange(1 << n)
    elif isinstance(state, SectorState):
        probs = np.abs(state.amplitudes) ** 2
        n = state.num_qubits
        labels = state.basis
    elif isinstance(state, MixedQuenchState):
        return state.magnetization()
    else:
        raise TypeError(f"cannot compute magnetization of {type(state)!r}")
    out = np.empty(n)
    for i in range(n):
        bit = (labels >> (n - 1 - i)) & 1
        out[i] = np.sum(probs * (2.0 * bit - 1.0))
    return out


# ---------------------------------------------------------------------------
# Mixed initial-state model
# ---------------------------------------------------------------------------

MAX_MIXTURE_COMPONENTS = 64


@dataclass(frozen=True)
class InitialStateModel:
    """Statistical mixture of Z-product initial states (bitstring -> weight)."""

    components: dict

    def __post_init__(self):
        comps = {}
        for bits, w in self.components.items():
            key = "".join(str(int(b)) for b in bits) if not isinstance(bits, str) else bits
            if any(ch not in "01" for ch in key):
                raise ValueError(f"invalid bitstring {key!r}")
            w = float(w)
            if w < 0:
                raise ValueError("weights must be nonnegative")
            comps[key] = comps.get(key, 0.0) + w
        total = sum(comps.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, expected 1")
        object.__setattr__(self, "components", comps)

    @classmethod
    def ideal(cls, bits) -> "InitialStateModel":
        key = bits if isinstance(bits, str) else "".join(str(int(b)) for b in bits)
        return cls({key: 1.0})

    @property
    def num_qubits(self):
        return len(next(iter(self.components)))


def neel_error_model(num_qubits, p_ideal=0.829, p_single=0.146,
                     p_multi=0.025) -> InitialStateModel:
    """Néel preparation with the observed error budget: the ideal pattern,
    uniform single flips, and uniform double flips for the multi-flip tail."""
    neel = [(i + 1) % 2 for i in range(num_qubits)]
    comps = {"".join(map(str, neel)): p_ideal}
    singles = []
    for i in range(num_qubits):
        flipped = list(neel)
        flipped[i] ^= 1
        singles.append("".join(map(str, flipped)))
    for key in singles:
        comps[key] = p_single / len(singles)
    doubles = []
    for i in range(num_qubits):
        for k in range(i + 1, num_qubits):
            flipped = list(neel)
            flipped[i] ^= 1
            flipped[k] ^= 1
            doubles.append("".join(map(str, flipped)))
    for key in doubles:
        comps[key] = p_multi / len(doubles)
    return InitialStateModel(comps)


class MixedQuenchState:
    """Lazily evaluated mixture sum_s f_s |psi_s(t)><psi_s(t)|.

    Every component starts as a Z-product state and therefore stays inside
    its own excitation sector; the full 2^N mixed matrix is never formed.
    """

    def __init__(self, weights, states):
        self.weights = tuple(float(w) for w in weights)
        self.states = tuple(states)
        self.num_qubits = self.states[0].num_qubits
        self._pure_cache = None

    def reduce(self, sites) -> DensityMatrix:
        from .states import reduce as reduce_state

        sites = tuple(int(s) for s in sites)
        acc = None
        for w, st in zip(self.weights, self.states):
            pure = st.to_pure_state() if isinstance(st, SectorState) else st
            part = reduce_state(pure, sites).matrix
            acc = w * part if acc is None else acc + w * part
        return DensityMatrix(acc, len(sites))

    def magnetization(self) -> np.ndarray:
        out = np.zeros(self.num_qubits)
        for w, st in zip(self.weights, self.states):
            out += w * magnetization(st)
        return out

    def expectation(self, pauli) -> float:
        from .states import expectation as expect

        total = 0.0
        for w, st in zip(self.weights, self.states):
            pure = st.to_pure_state() if isinstance(st, SectorState) else st
            total += w * expect(pure, pauli)
        return total

    def component_pure_states(self):
        if self._pure_cache is None:
            self._pure_cache = tuple(
                st.to_pure_state() if isinstance(st, SectorState) else st
                for st in self.states
            )
        return list(zip(self.weights, self._pure_cache))


def evolve_mixture(model: CouplingModel, init: InitialStateModel, t,
                   simulator: QuenchSimulator | None = None) -> MixedQuenchState:
    """Evolve every initial-model component in its own sector and mix."""
    if len(init.components) > MAX_MIXTURE_COMPONENTS:
        raise ValueError(
            f"{len(init.components)} components exceed the cap "
            f"{MAX_MIXTURE_COMPONENTS}"
        )
    sim = simulator or QuenchSimulator(model)
    weights, states = [], []
    for bits, w in sorted(init.components.items()):
        if w == 0.0:
            continue
        weights.append(w)
        states.append(sim.evolve(SectorState.from_bitstring(bits), t))
    return MixedQuenchState(weights, states)
