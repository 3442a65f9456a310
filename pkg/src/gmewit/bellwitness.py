"""Average Bell-fidelity witnesses for genuine multipartite entanglement.

Two functionals over pairwise correlators of a k-qubit group:

* symmetric:   (b_k + sum_{i<j} |<XX>| + |<YY>| + |<ZZ>|) / (4 b_k)
* neighbour:   ((k-1) + sum_i |<O_i O_{i+1}>| triples) / (4 (k-1))

evaluated in a locally rotated frame X~ = cos(t) X - sin(t) Y,
Y~ = sin(t) X + cos(t) Y, Z~ = Z (one angle per qubit).  A value above the
matching biseparability threshold certifies genuine k-partite
entanglement for any choice of rotation angles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .measure import covariance as table_covariance
from .measure import estimate_correlator
from .states import PauliAxis, PauliString, expectation

_AXES = (PauliAxis.X, PauliAxis.Y, PauliAxis.Z)
_SQRT3 = math.sqrt(3.0)


# ---------------------------------------------------------------------------
# Thresholds (closed forms)
# ---------------------------------------------------------------------------

def threshold(kind: str, k: int) -> float:
    """Detection / saturation constants for group size k.

    symmetric_bisep: largest value reachable by biseparable states
                     (k = 2 reduces to the plain Bell-fidelity bound 1/2)
    symmetric_max:   largest value reachable by any state, (1 + sqrt3)/4
    nn_bisep:        purity-improved biseparable bound, defined for k = 3
    nn_max:          general-state bound of the neighbour fidelity
    """
    if kind == "symmetric_bisep":
        if k == 2:
            return 0.5
        if k == 3:
            return (3.0 + math.sqrt(15.0)) / 12.0
        if k >= 4:
            return (1.0 + _SQRT3) / 4.0 - (_SQRT3 - 1.0) / (2.0 * k)
    elif kind == "symmetric_max":
        if k >= 3:
            return (1.0 + _SQRT3) / 4.0
    elif kind == "nn_bisep":
        if k == 3:
            return (1.0 + _SQRT3) / 4.0
    elif kind == "nn_max":
        if k >= 3 and k % 2 == 1:
            return (2.0 + 3.0 * math.sqrt(2.0)) / 8.0
        if k >= 2:
            return ((k - 1) + 1.5 * (k - 2) * math.sqrt(2.0) + 3.0) / (4.0 * (k - 1))
    raise ValueError(f"threshold {kind!r} is not defined for k={k}")


# ---------------------------------------------------------------------------
# Correlator containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalRotationSet:
    """One equatorial rotation angle per qubit of the group."""

    thetas: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "thetas", tuple(float(t) % (2.0 * math.pi) for t in self.thetas)
        )

    @classmethod
    def zero(cls, k):
        return cls((0.0,) * k)


class CorrelatorData:
    """All 9 two-site correlators for every pair of a group of sites.

    values: array (n_pairs, 3, 3) over axis pairs (XYZ x XYZ)
    cov:    optional covariance matrix between the flattened raw entries,
            used for error propagation of measured data (zero for exact
            model states).
    """

    def __init__(self, group, values, cov=None):
        self.group = tuple(int(s) for s in group)
        self.pairs = list(itertools.combinations(range(len(self.group)), 2))
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (len(self.pairs), 3, 3):
            raise ValueError("expected one 3x3 correlator block per pair")
        self.cov = None if cov is None else np.asarray(cov, dtype=float)

    def entry_index(self, pair_idx, a, b):
        return (pair_idx * 3 + a) * 3 + b


def correlators_from_state(state, group) -> CorrelatorData:
    """Exact correlators of a model state (no statistical uncertainty)."""
    group = tuple(group)
    if hasattr(state, "num_qubits"):
        n = state.num_qubits
    else:
        raise TypeError("state must expose num_qubits")
    pairs = list(itertools.combinations(range(len(group)), 2))
    values = np.empty((len(pairs), 3, 3))
    for p, (gi, gj) in enumerate(pairs):
        si, sj = group[gi], group[gj]
        for a, ax in enumerate(_AXES):
            for b, bx in enumerate(_AXES):
                ops = PauliString.two_site(n, si, ax, sj, bx)
                values[p, a, b] = expectation(state, ops)
    return CorrelatorData(group, values)


def correlators_from_tables(tables, group) -> CorrelatorData:
    """Pooled correlator estimates plus their covariance matrix."""
    group = tuple(group)
    n = tables[0].setting.num_qubits
    pairs = list(itertools.combinations(range(len(group)), 2))
    values = np.empty((len(pairs), 3, 3))
    ops_list = []
    for p, (gi, gj) in enumerate(pairs):
        si, sj = group[gi], group[gj]
        for a, ax in enumerate(_AXES):
            for b, bx in enumerate(_AXES):
                ops = PauliString.two_site(n, si, ax, sj, bx)
                est = estimate_correlator(tables, ops)
                values[p, a, b] = est.value
                ops_list.append(ops)
    m = len(ops_list)
    cov = np.zeros((m, m))
    for i in range(m):
        for j in range(i, m):
            cov[i, j] = cov[j, i] = table_covariance(tables, ops_list[i], ops_list[j])
    return CorrelatorData(group, values, cov)


# ---------------------------------------------------------------------------
# Rotated fidelity evaluation
# ---------------------------------------------------------------------------

def _rotated_terms(values, pairs, thetas):
    """Per pair: (X~X~, Y~Y~, Z~Z~) for the given angles (vectorized over
    any leading grid shape of thetas)."""
    thetas = np.asarray(thetas, dtype=float)
    c = np.cos(thetas)
    s = np.sin(thetas)
    out = []
    for p, (i, j) in enumerate(pairs):
        exx, exy, eyx, eyy = (
            values[p, 0, 0],
            values[p, 0, 1],
            values[p, 1, 0],
            values[p, 1, 1],
        )
        ci, cj = c[..., i], c[..., j]
        si, sj = s[..., i], s[..., j]
        xx = ci * cj * exx - ci * sj * exy - si * cj * eyx + si * sj * eyy
        yy = si * sj * exx + si * cj * exy + ci * sj * eyx + ci * cj * eyy
        zz = np.broadcast_to(values[p, 2, 2], xx.shape) if xx.ndim else values[p, 2, 2]
        out.append((xx, yy, zz))
    return out


def _fidelity_from_terms(terms, n_pairs):
    total = 0.0
    for xx, yy, zz in terms:
        total = total + np.abs(xx) + np.abs(yy) + np.abs(zz)
    return (n_pairs + total) / (4.0 * n_pairs)


def symmetric_bell_fidelity(corr: CorrelatorData, rotations: LocalRotationSet, k: int):
    """Symmetric average Bell fidelity and its propagated standard error.

    Error propagation linearizes the absolute values with the observed
    signs; any rotated correlator within one sigma of zero contributes its
    full standard error instead (conservative choice for unstable signs).
    """
    if k != len(corr.group):
        raise ValueError("group size mismatch")
    if len(corr.pairs) != k * (k - 1) // 2:
        raise ValueError("missing pairs")
    terms = _rotated_terms(corr.values, corr.pairs, rotations.thetas)
    value = float(_fidelity_from_terms(terms, len(corr.pairs)))
    if corr.cov is None:
        return value, 0.0
    std = _propagate_error(corr, rotations, terms)
    return value, std


def nn_bell_fidelity(corr: CorrelatorData, rotations: LocalRotationSet, k: int) -> float:
    """Average nearest-neighbour Bell fidelity at the given rotations."""
    nn_pairs = [(i, i + 1) for i in range(k - 1)]
    pair_pos = {pair: p for p, pair in enumerate(corr.pairs)}
    missing = [pair for pair in nn_pairs if pair not in pair_pos]
    if missing:
        raise ValueError(f"missing neighbour pairs {missing}")
    sel = [pair_pos[pair] for pair in nn_pairs]
    terms = _rotated_terms(corr.values[sel], nn_pairs, rotations.thetas)
    return float(_fidelity_from_terms(terms, len(nn_pairs)))


def _propagate_error(corr, rotations, terms):
    k = len(corr.group)
    n_pairs = len(corr.pairs)
    thetas = np.asarray(rotations.thetas)
    c, s = np.cos(thetas), np.sin(thetas)
    m = corr.cov.shape[0]
    weight = np.zeros(m)
    extra = 0.0
    scale = 1.0 / (4.0 * n_pairs)
    for p, (i, j) in enumerate(corr.pairs):
        ci, cj, si, sj = c[i], c[j], s[i], s[j]
        combos = {
            "xx": {(0, 0): ci * cj, (0, 1): -ci * sj, (1, 0): -si * cj, (1, 1): si * sj},
            "yy": {(0, 0): si * sj, (0, 1): si * cj, (1, 0): ci * sj, (1, 1): ci * cj},
            "zz": {(2, 2): 1.0},
        }
        rotated = {"xx": terms[p][0], "yy": terms[p][1], "zz": terms[p][2]}
        for name, coeffs in combos.items():
            w = np.zeros(m)
            for (a, b), coef in coeffs.items():
                w[corr.entry_index(p, a, b)] = coef
            sigma = math.sqrt(max(float(w @ corr.cov @ w), 0.0))
            val = float(rotated[name])
            if abs(val) < sigma:
                extra += scale * sigma
            else:
                weight += scale * math.copysign(1.0, val) * w
    var = float(weight @ corr.cov @ weight)
    return math.sqrt(max(var, 0.0)) + extra


# ---------------------------------------------------------------------------
# Rotation optimization (grid + simplex refinement, X-Y plane)
# ---------------------------------------------------------------------------

GRID_POINTS_SMALL = 16  # k <= 3
GRID_POINTS_LARGE = 8


def optimize_rotations(corr: CorrelatorData, k: int, plane: str = "xy"):
    """Maximize the symmetric fidelity over per-qubit equatorial angles.

    Deterministic: coarse grid (theta = 0 first, ties keep the earliest
    grid point) followed by Nelder-Mead refinement; the result never falls
    below the unrotated value.
    """
    if plane != "xy":
        raise ValueError("only X-Y plane optimization is supported for verdicts")
    if k != len(corr.group):
        raise ValueError("group size mismatch")
    points = GRID_POINTS_SMALL if k <= 3 else GRID_POINTS_LARGE
    grid_1d = 2.0 * math.pi * np.arange(points) / points

    mesh = np.meshgrid(*([grid_1d] * k), indexing="ij")
    thetas = np.stack(mesh, axis=-1)
    terms = _rotated_terms(corr.values, corr.pairs, thetas)
    grid_vals = _fidelity_from_terms(terms, len(corr.pairs))
    flat = np.asarray(grid_vals).reshape(-1)
    best = int(np.argmax(flat))  # first occurrence wins ties, theta=0 first
    start = thetas.reshape(-1, k)[best]

    def negative_fidelity(angles):
        t = _rotated_terms(corr.values, corr.pairs, np.asarray(angles))
        return -float(_fidelity_from_terms(t, len(corr.pairs)))

    refined = minimize(
        negative_fidelity,
        start,
        method="Nelder-Mead",
        options={"maxiter": 200 * k, "xatol": 1e-7, "fatol": 1e-10},
    )
    candidates = [
        (float(flat[0]), np.zeros(k)),
        (float(flat[best]), start),
        (-float(refined.fun), np.asarray(refined.x)),
    ]
    value, best_thetas = max(candidates, key=lambda item: item[0])
    return LocalRotationSet(tuple(best_thetas)), value


# ---------------------------------------------------------------------------
# Verdicts and sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FidelityVerdict:
    k: int
    group: tuple
    value: float
    std_error: float
    threshold: float
    detected: bool

    def __post_init__(self):
        if self.detected != (self.value - self.threshold > 0.0):
            raise ValueError("verdict flag inconsistent with value and threshold")


def verdict_for_group(corr: CorrelatorData, k: int) -> FidelityVerdict:
    rotations, _ = optimize_rotations(corr, k)
    value, std = symmetric_bell_fidelity(corr, rotations, k)
    thr = threshold("symmetric_bisep", k)
    return FidelityVerdict(
        k=k,
        group=corr.group,
        value=value,
        std_error=std,
        threshold=thr,
        detected=value - thr > 0.0,
    )


def fidelity_sweep(counts_by_time, k_values=(2, 3)) -> list:
    """Optimized symmetric-fidelity verdicts for every neighbouring group.

    counts_by_time: sequence of (t_ms, list of CountsTable).
    Returns rows of dicts in the sweep CSV shape.
    """
    rows = []
    for t_ms, tables in counts_by_time:
        n = tables[0].setting.num_qubits
        for k in k_values:
            for start in range(1, n - k + 2):
                group = tuple(range(start, start + k))
                corr = correlators_from_tables(tables, group)
                verdict = verdict_for_group(corr, k)
                rows.append(
                    {
                        "t_ms": float(t_ms),
                        "k": k,
                        "group_start": start,
                        "value": verdict.value,
                        "std_error": verdict.std_error,
                        "threshold": verdict.threshold,
                        "detected": verdict.detected,
                    }
                )
    return rows
