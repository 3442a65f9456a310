"""Maximum-likelihood reconstruction of small reduced states from counts.

The reconstruction uses the diluted iterative R rho R fixed point with
dilution 0.5 (halved adaptively whenever a step would lower the
multinomial log-likelihood, which keeps the iteration monotone), started
from the maximally mixed state.  Registers larger than 3 qubits are
rejected: witnesses, not tomography, are the tool at that size.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .measure import CountsTable
from .states import AXIS_EIGENVECTORS, Bipartition, DensityMatrix, PauliAxis, negativity

MAX_TOMOGRAPHY_QUBITS = 3
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERATIONS = 5000


class TomographyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TomographyInput:
    """Counts plus the (ordered) sites to reconstruct, at most 3 of them."""

    tables: tuple
    sites: tuple

    def __post_init__(self):
        sites = tuple(int(s) for s in self.sites)
        if not 1 <= len(sites) <= MAX_TOMOGRAPHY_QUBITS:
            raise ValueError(
                f"tomography handles 1..{MAX_TOMOGRAPHY_QUBITS} qubits; "
                "use the witness pipeline for larger groups"
            )
        if len(set(sites)) != len(sites):
            raise ValueError("sites must be distinct")
        tables = tuple(self.tables)
        if not tables:
            raise ValueError("no counts supplied")
        n = tables[0].setting.num_qubits
        if any(s < 1 or s > n for s in sites):
            raise ValueError("site outside the measured register")
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "sites", sites)
        # informational completeness: every local basis combination present
        seen = {tuple(t.setting.axes[s - 1] for s in sites) for t in tables}
        missing = set(
            itertools.product((PauliAxis.X, PauliAxis.Y, PauliAxis.Z), repeat=len(sites))
        ) - seen
        if missing:
            label = ",".join("".join(str(a) for a in m) for m in sorted(missing, key=str))
            raise ValueError(f"missing local bases for sites {sites}: {label}")


def _marginal_counts(tables, sites):
    """Pool tables by their local axes on the sites; outcome -> count."""
    pooled = {}
    for table in tables:
        axes = tuple(table.setting.axes[s - 1] for s in sites)
        bucket = pooled.setdefault(axes, {})
        for key, c in table.counts.items():
            sub = "".join(key[s - 1] for s in sites)
            bucket[sub] = bucket.get(sub, 0) + c
    return pooled


def _local_projectors(axes):
    """All 2^k rank-1 projectors of a local basis, keyed by outcome bits."""
    k = len(axes)
    out = {}
    for bits in itertools.product((0, 1), repeat=k):
        v = np.array([1.0 + 0.0j])
        for axis, b in zip(axes, bits):
            v = np.kron(v, AXIS_EIGENVECTORS[axis][b])
        key = "".join(str(b) for b in bits)
        out[key] = np.outer(v, v.conj())
    return out


def _log_likelihood(rho, effects, counts):
    probs = np.real(np.einsum("aij,ji->a", effects, rho))
    probs = np.clip(probs, 1e-15, None)
    return float(counts @ np.log(probs))


def mle_reconstruct_info(data: TomographyInput, tol=DEFAULT_TOL,
                         max_iterations=DEFAULT_MAX_ITERATIONS, dilution=0.5):
    """Run the fixed point; returns (DensityMatrix, info dict)."""
    pooled = _marginal_counts(data.tables, data.sites)
    k = len(data.sites)
    dim = 1 << k

    effects, counts = [], []
    for axes, bucket in sorted(pooled.items(), key=lambda kv: str(kv[0])):
        projs = _local_projectors(axes)
        for key, proj in sorted(projs.items()):
            effects.append(proj)
            counts.append(bucket.get(key, 0))
    effects = np.array(effects)
    counts = np.array(counts, dtype=float)
    n_total = counts.sum()

    rho = np.eye(dim, dtype=complex) / dim
    history = [_log_likelihood(rho, effects, counts)]
    converged = False
    for _ in range(max_iterations):
        probs = np.real(np.einsum("aij,ji->a", effects, rho))
        probs = np.clip(probs, 1e-15, None)
        # R = (1/N) sum_a (n_a / p_a) Pi_a; identity at the true distribution
        weights = counts / (n_total * probs)
        r_op = np.einsum("a,aij->ij", weights, effects)
        lam = dilution
        prev = history[-1]
        while True:
            step = (1.0 - lam) * np.eye(dim) + lam * r_op
            cand = step @ rho @ step.conj().T
            cand = 0.5 * (cand + cand.conj().T)
            cand /= np.real(np.trace(cand))
            ll = _log_likelihood(cand, effects, counts)
            if ll >= prev or lam < 1e-6:
                break
            lam *= 0.5
        rho = cand
        history.append(max(ll, prev))
        if ll - prev < tol:
            converged = ll >= prev - tol
            break
    if not converged:
        warnings.warn(
            f"MLE did not converge within {max_iterations} iterations "
            f"(last change {history[-1] - history[-2]:.2e}); returning last iterate",
            TomographyWarning,
        )
    info = {
        "loglik_history": history,
        "iterations": len(history) - 1,
        "converged": converged,
    }
    return DensityMatrix(rho, k), info


def mle_reconstruct(data: TomographyInput, tol=DEFAULT_TOL,
                    max_iterations=DEFAULT_MAX_ITERATIONS, dilution=0.5) -> DensityMatrix:
    """Most likely physical density matrix for the recorded counts."""
    rho, _ = mle_reconstruct_info(data, tol, max_iterations, dilution)
    return rho


def pair_negativity_sweep(counts_by_time, pairs=None, resamples=100, seed=0):
    """Per time step and neighbouring pair: MLE state, negativity, error bar.

    counts_by_time: sequence of (t_ms, list of CountsTable).
    Returns rows of dicts with keys t_ms, site_i, site_j, negativity,
    std_error.
    """
    from .measure import bootstrap

    rows = []
    for t_ms, tables in counts_by_time:
        n = tables[0].setting.num_qubits
        wanted = pairs or [(i, i + 1) for i in range(1, n)]
        for i, j in wanted:
            data = TomographyInput(tuple(tables), (i, j))

            def neg_stat(resampled, _sites=(i, j)):
                rho = mle_reconstruct(TomographyInput(tuple(resampled), _sites))
                return negativity(rho, Bipartition((1,), 2))

            value = neg_stat(tables)
            _, std = bootstrap(tables, neg_stat, resamples, seed=(seed, i, j))
            rows.append(
                {
                    "t_ms": float(t_ms),
                    "site_i": i,
                    "site_j": j,
                    "negativity": float(value),
                    "std_error": float(std),
                }
            )
    return rows
