"""Seeded random states for property tests and witness soundness sweeps."""

from __future__ import annotations

import numpy as np

from .states import Bipartition, DensityMatrix, PureState, all_bipartitions


def random_pure_state(num_qubits, rng) -> PureState:
    dim = 1 << num_qubits
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return PureState(v / np.linalg.norm(v), num_qubits)


def random_density_matrix(num_qubits, rng, rank=None) -> DensityMatrix:
    """Hilbert-Schmidt style random mixed state from a Ginibre block."""
    dim = 1 << num_qubits
    r = rank or dim
    g = rng.standard_normal((dim, r)) + 1j * rng.standard_normal((dim, r))
    rho = g @ g.conj().T
    rho /= rho.trace()
    return DensityMatrix(rho, num_qubits)


def random_product_state(num_qubits, rng) -> PureState:
    amps = np.array([1.0 + 0.0j])
    for _ in range(num_qubits):
        q = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        amps = np.kron(amps, q / np.linalg.norm(q))
    return PureState(amps, num_qubits)


def random_pure_biseparable(num_qubits, rng, cut: Bipartition | None = None):
    """Pure state factoring across one bipartition, embedded on {1..k}."""
    cuts = all_bipartitions(num_qubits)
    if cut is None:
        cut = cuts[rng.integers(len(cuts))]
    da, db = 1 << len(cut.side_a), 1 << len(cut.side_b)
    va = rng.standard_normal(da) + 1j * rng.standard_normal(da)
    vb = rng.standard_normal(db) + 1j * rng.standard_normal(db)
    va /= np.linalg.norm(va)
    vb /= np.linalg.norm(vb)
    prod = np.kron(va, vb).reshape((2,) * num_qubits)
    # kron order is (sites of A, sites of B); permute back to 1..k
    order = [s - 1 for s in cut.side_a] + [s - 1 for s in cut.side_b]
    inverse = np.argsort(order)
    amps = np.transpose(prod, inverse).reshape(-1)
    return PureState(amps, num_qubits)


def random_biseparable_state(num_qubits, rng, terms=4) -> DensityMatrix:
    """Convex mixture of pure biseparable states over random cuts."""
    weights = rng.dirichlet(np.ones(terms))
    dim = 1 << num_qubits
    rho = np.zeros((dim, dim), dtype=complex)
    for w in weights:
        psi = random_pure_biseparable(num_qubits, rng)
        rho += w * np.outer(psi.amplitudes, psi.amplitudes.conj())
    return DensityMatrix(rho, num_qubits)
