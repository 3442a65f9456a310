"""Finite-shot projective measurement in the period-3 scheme.

27 global settings labelled by (a1, a2, a3) in {X,Y,Z}^3 assign axis
``a_{((i-1) mod 3) + 1}`` to site i, so sites three apart share an axis and
every neighbouring triple of sites sees all 27 local basis combinations.
Outcome bit 1 on a site means the +1 eigenstate of the measured axis; in
the Z basis an outcome bitstring is the computational basis label itself.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import MixedQuenchState, SectorState
from .states import AXIS_EIGENVECTORS, PauliAxis, PauliString, PureState, axis_from_label

_AXES3 = (PauliAxis.X, PauliAxis.Y, PauliAxis.Z)


@dataclass(frozen=True)
class MeasurementSetting:
    """One global choice of a measurement axis per qubit."""

    axes: tuple
    label: tuple = None

    def __post_init__(self):
        axes = tuple(axis_from_label(a) for a in self.axes)
        if any(a is PauliAxis.I for a in axes):
            raise ValueError("every site needs a measurement axis")
        object.__setattr__(self, "axes", axes)
        if self.label is not None:
            object.__setattr__(
                self, "label", tuple(axis_from_label(a) for a in self.label)
            )

    @classmethod
    def from_label(cls, label, num_qubits) -> "MeasurementSetting":
        label = tuple(axis_from_label(a) for a in label)
        if len(label) != 3:
            raise ValueError("scheme labels are axis triples")
        axes = tuple(label[i % 3] for i in range(num_qubits))
        return cls(axes, label)

    @property
    def num_qubits(self):
        return len(self.axes)

    def label_str(self):
        if self.label is not None:
            return "".join(str(a) for a in self.label)
        return "".join(str(a) for a in self.axes)


def scheme_settings(num_qubits) -> list:
    """The 27 period-3 settings covering all neighbouring triples."""
    if num_qubits < 3:
        raise ValueError("the 27-setting scheme needs at least 3 sites")
    return [
        MeasurementSetting.from_label(label, num_qubits)
        for label in itertools.product(_AXES3, repeat=3)
    ]


def scheme_covers_neighbouring_triplets(settings, num_qubits) -> bool:
    """Every triple (i, i+1, i+2) must see all 27 axis combinations."""
    for start in range(num_qubits - 2):
        seen = {
            (s.axes[start], s.axes[start + 1], s.axes[start + 2]) for s in settings
        }
        if len(seen) != 27:
            return False
    return True


@dataclass(frozen=True)
class CountsTable:
    """Sparse outcome histogram of one setting (bitstring -> count)."""

    setting: MeasurementSetting
    counts: dict
    shots: int

    def __post_init__(self):
        n = self.setting.num_qubits
        counts = {}
        for key, c in self.counts.items():
            if len(key) != n or any(ch not in "01" for ch in key):
                raise ValueError(f"bad outcome bitstring {key!r}")
            c = int(c)
            if c < 0:
                raise ValueError("counts must be nonnegative")
            if c:
                counts[key] = c
        if sum(counts.values()) != self.shots:
            raise ValueError("counts must sum to the number of shots")
        object.__setattr__(self, "counts", counts)

    def outcome_arrays(self):
        """(bits matrix of shape (n_outcomes, N), count vector)."""
        keys = sorted(self.counts)
        bits = np.array([[int(ch) for ch in k] for k in keys], dtype=np.int8)
        cnt = np.array([self.counts[k] for k in keys], dtype=np.int64)
        return bits, cnt


# ---------------------------------------------------------------------------
# Born sampling
# ---------------------------------------------------------------------------

def _measurement_matrix(axis):
    """Rows are conjugated eigenvectors; row b maps amplitudes to outcome b."""
    v0, v1 = AXIS_EIGENVECTORS[axis]
    return np.vstack([v0.conj(), v1.conj()])


def born_probabilities(state, setting: MeasurementSetting) -> np.ndarray:
    """Outcome distribution over all 2^N bitstrings (index = bitstring)."""
    if isinstance(state, MixedQuenchState):
        probs = np.zeros(1 << state.num_qubits)
        for w, pure in state.component_pure_states():
            probs += w * born_probabilities(pure, setting)
        return probs
    if isinstance(state, SectorState):
        state = state.to_pure_state()
    if not isinstance(state, PureState):
        raise TypeError(f"cannot sample from {type(state)!r}")
    n = state.num_qubits
    if setting.num_qubits != n:
        raise ValueError("setting size does not match the state")
    t = state.tensor()
    for i, axis in enumerate(setting.axes):
        if axis is PauliAxis.Z:
            continue
        t = np.tensordot(_measurement_matrix(axis), t, axes=([1], [i]))
        t = np.moveaxis(t, 0, i)
    probs = np.abs(t.reshape(-1)) ** 2
    return probs / probs.sum()


def sample(state, setting: MeasurementSetting, shots: int, seed) -> CountsTable:
    """Multinomial Born sampling; deterministic for a fixed seed."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    probs = born_probabilities(state, setting)
    rng = np.random.default_rng(seed)
    draw = rng.multinomial(shots, probs)
    n = setting.num_qubits
    counts = {
        format(idx, f"0{n}b"): int(c) for idx, c in enumerate(draw) if c > 0
    }
    return CountsTable(setting, counts, shots)


def setting_seed(master_seed, setting_index):
    """Stable per-setting seed stream derived from the master seed."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(setting_index,))


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelatorEstimate:
    value: float
    std_error: float
    shots_used: int
    source_settings: tuple = ()

    def __post_init__(self):
        if abs(self.value) > 1.0 + 1e-12:
            raise ValueError("correlator estimates live in [-1, 1]")
        if self.std_error > 1.0 + 1e-12 or self.std_error < 0.0:
            raise ValueError("standard error must lie in [0, 1]")


def estimate_probability(counts: CountsTable, sites, outcome) -> CorrelatorEstimate:
    """Marginal relative frequency of an outcome on a subset of sites."""
    if counts.shots == 0:
        raise ValueError("no shots recorded")
    sites = tuple(int(s) for s in sites)
    n = counts.setting.num_qubits
    if any(s < 1 or s > n for s in sites):
        raise ValueError("site outside the register")
    want = outcome if isinstance(outcome, str) else "".join(str(int(b)) for b in outcome)
    if len(want) != len(sites):
        raise ValueError("outcome length must match the site list")
    hits = 0
    for key, c in counts.counts.items():
        if all(key[s - 1] == want[i] for i, s in enumerate(sites)):
            hits += c
    p = hits / counts.shots
    std = float(np.sqrt(p * (1.0 - p) / counts.shots))
    return CorrelatorEstimate(p, std, counts.shots, (counts.setting.label_str(),))


def compatible_tables(tables, ops: PauliString):
    """Tables whose setting matches the operator on its support."""
    support = ops.support()
    out = []
    for table in tables:
        axes = table.setting.axes
        if all(axes[s - 1] is ops.ops[s - 1] for s in support):
            out.append(table)
    return out


def _shot_products(table: CountsTable, ops: PauliString):
    """Per-outcome +-1 products and counts for one table."""
    bits, cnt = table.outcome_arrays()
    prod = np.ones(bits.shape[0])
    for s in ops.support():
        prod *= 2.0 * bits[:, s - 1] - 1.0
    return prod, cnt


def estimate_correlator(tables, ops: PauliString) -> CorrelatorEstimate:
    """Shot-weighted pooled estimate of a +-1-valued Pauli product."""
    if ops.coefficient != 1.0:
        raise ValueError("estimate unit-coefficient operators")
    compat = compatible_tables(tables, ops)
    if not compat:
        raise ValueError(f"no compatible setting for {ops}")
    total = 0
    acc = 0.0
    for table in compat:
        prod, cnt = _shot_products(table, ops)
        acc += float(prod @ cnt)
        total += table.shots
    mean = acc / total
    # Sample variance of a +-1 variable: n (1 - mean^2) / (n - 1).
    if total > 1:
        var_mean = (1.0 - mean**2) / (total - 1)
    else:
        var_mean = 0.0
    mean = min(1.0, max(-1.0, mean))
    return CorrelatorEstimate(
        mean,
        float(np.sqrt(max(var_mean, 0.0))),
        total,
        tuple(t.setting.label_str() for t in compat),
    )


def covariance(tables, ops_a: PauliString, ops_b: PauliString) -> float:
    """Covariance of two pooled correlator estimates.

    Shots from settings measuring both operators contribute their sample
    covariance; disjoint source settings give exactly zero.  With identical
    pools this reduces to the estimate variance.
    """
    compat_a = compatible_tables(tables, ops_a)
    compat_b = compatible_tables(tables, ops_b)
    if not compat_a or not compat_b:
        raise ValueError("both correlators must be estimable")
    n_a = sum(t.shots for t in compat_a)
    n_b = sum(t.shots for t in compat_b)
    shared = [t for t in compat_a if any(t is u for u in compat_b)]
    if not shared:
        return 0.0
    n_sh = sum(t.shots for t in shared)
    sum_a = sum_b = sum_ab = 0.0
    for table in shared:
        pa, cnt = _shot_products(table, ops_a)
        pb, _ = _shot_products(table, ops_b)
        sum_a += float(pa @ cnt)
        sum_b += float(pb @ cnt)
        sum_ab += float((pa * pb) @ cnt)
    if n_sh < 2:
        return 0.0
    mean_a, mean_b = sum_a / n_sh, sum_b / n_sh
    cov_shot = (sum_ab - n_sh * mean_a * mean_b) / (n_sh - 1)
    return cov_shot * n_sh / (n_a * n_b)


def bootstrap(tables, statistic, resamples: int, seed):
    """Monte Carlo error bar: multinomial resampling of every table."""
    if resamples < 100:
        raise ValueError("use at least 100 resamples")
    rng = np.random.default_rng(seed)
    values = []
    prepared = []
    for table in tables:
        keys = sorted(table.counts)
        cnt = np.array([table.counts[k] for k in keys], dtype=float)
        prepared.append((table, keys, cnt / table.shots))
    for _ in range(resamples):
        fake = []
        for table, keys, probs in prepared:
            draw = rng.multinomial(table.shots, probs)
            counts = {k: int(c) for k, c in zip(keys, draw) if c > 0}
            fake.append(CountsTable(table.setting, counts, table.shots))
        values.append(statistic(fake))
    values = np.asarray(values, dtype=float)
    mean = values.mean(axis=0)
    std = values.std(axis=0, ddof=1)
    return mean, std


# ---------------------------------------------------------------------------
# Counts persistence (JSON Lines)
# ---------------------------------------------------------------------------

def counts_to_record(table: CountsTable) -> dict:
    return {
        "label": [str(a) for a in table.setting.label] if table.setting.label else None,
        "axes": [str(a) for a in table.setting.axes],
        "shots": table.shots,
        "counts": dict(sorted(table.counts.items())),
    }


def counts_from_record(record: dict) -> CountsTable:
    axes = tuple(axis_from_label(a) for a in record["axes"])
    label = record.get("label")
    setting = MeasurementSetting(axes, tuple(label) if label else None)
    return CountsTable(setting, dict(record["counts"]), int(record["shots"]))


def write_counts_jsonl(tables, path):
    with open(path, "w") as fh:
        for table in tables:
            fh.write(json.dumps(counts_to_record(table)) + "\n")


def read_counts_jsonl(path) -> list:
    tables = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                tables.append(counts_from_record(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad counts record: {exc}") from exc
    return tables
