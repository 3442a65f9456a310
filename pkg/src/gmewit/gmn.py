"""Genuine multipartite negativity and accessible quantitative witnesses.

The GMN of a state is computed either from the pure-state formula
(minimum bipartite negativity over all cuts) or through the witness SDP

    max -Tr(Q rho)   s.t.  Q >= R_A^{T_A},  0 <= R_A <= 1   for every cut,

whose optimum vanishes exactly on PPT mixtures.  Witnesses accessible to
the 27-setting scheme are restricted to the projector basis B_k (period-3
local bases, 27 * 2^k rank-1 projectors) with coefficients in [-1, 1] and
the additional slack bound Q - R_A^{T_A} <= 1; they are sparsified by a
reweighted l1 relaxation that may trade at most epsilon of the bound.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .sdp import MatExpr, ScalarExpr, SdpProblem, solve
from .sdp.solver import SdpError
from .states import (
    AXIS_EIGENVECTORS,
    Bipartition,
    DensityMatrix,
    PauliAxis,
    PureState,
    all_bipartitions,
    axis_from_label,
    negativity,
    reduce as reduce_state,
)

GMN_PURE_MAX_QUBITS = 10
GMN_SDP_MAX_QUBITS = 5
SPARSITY_THRESHOLD = 1e-6
DEFAULT_EPSILON = 5e-3
DEFAULT_L1_ITERATIONS = 3

_AXES3 = (PauliAxis.X, PauliAxis.Y, PauliAxis.Z)


class GmnSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class BasisElement:
    outcome: str  # bits, group site order
    alpha: tuple  # three axis labels, period-3

    def axes(self, k, offset):
        return tuple(self.alpha[(j + offset) % 3] for j in range(k))


class ProjectorBasis:
    """The 27 * 2^k rank-1 projectors measurable on k consecutive sites.

    offset is the phase (start_site - 1) mod 3 aligning the period-3
    pattern of the global settings with the group.
    """

    def __init__(self, k, offset=0):
        if not 2 <= k <= GMN_SDP_MAX_QUBITS:
            raise ValueError(f"projector basis supports 2..{GMN_SDP_MAX_QUBITS} sites")
        if offset not in (0, 1, 2):
            raise ValueError("offset must be 0, 1 or 2")
        self.k = k
        self.offset = offset
        self.elements = [
            BasisElement("".join(str(b) for b in bits), alpha)
            for alpha in itertools.product(_AXES3, repeat=3)
            for bits in itertools.product((0, 1), repeat=k)
        ]
        self._vectors = None

    def __len__(self):
        return len(self.elements)

    def vectors(self) -> np.ndarray:
        """(n_elements, 2^k) array of the projected product states."""
        if self._vectors is None:
            dim = 1 << self.k
            out = np.empty((len(self.elements), dim), dtype=complex)
            for n, el in enumerate(self.elements):
                v = np.array([1.0 + 0.0j])
                for j, axis in enumerate(el.axes(self.k, self.offset)):
                    v = np.kron(v, AXIS_EIGENVECTORS[axis][int(el.outcome[j])])
                out[n] = v
            self._vectors = out
        return self._vectors

    def projector(self, n) -> np.ndarray:
        v = self.vectors()[n]
        return np.outer(v, v.conj())

    def span_rank(self, tol=1e-9) -> int:
        """Rank of the projector family inside Hermitian operator space."""
        vecs = self.vectors()
        flat = np.einsum("ni,nj->nij", vecs, vecs.conj()).reshape(len(self.elements), -1)
        return int(np.linalg.matrix_rank(flat, tol=tol))

    def probabilities(self, rho) -> np.ndarray:
        """Born probabilities Tr(P_n rho) for a k-qubit density matrix."""
        mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
        vecs = self.vectors()
        return np.real(np.einsum("ni,ij,nj->n", vecs.conj(), mat, vecs))


def projector_basis(k, offset=0) -> ProjectorBasis:
    return ProjectorBasis(k, offset)


# ---------------------------------------------------------------------------
# Genuine multipartite negativity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GmnResult:
    value: float
    method: str  # pure_formula | sdp | witness_evaluation
    witness: object = None
    std_error: float = None

    def __post_init__(self):
        if self.method in ("pure_formula", "sdp") and self.value < -1e-9:
            raise ValueError("negativity-based values cannot be negative")


def gmn_pure(psi: PureState) -> GmnResult:
    """Minimum bipartite negativity over all cuts (pure states only)."""
    k = psi.num_qubits
    if k > GMN_PURE_MAX_QUBITS:
        raise ValueError(f"pure-state GMN capped at {GMN_PURE_MAX_QUBITS} qubits")
    rho = psi.density_matrix()
    value = min(negativity(rho, part) for part in all_bipartitions(k))
    return GmnResult(max(value, 0.0), "pure_formula")


def _gmn_sdp_problem(mat, k, cap_slack=False):
    problem = SdpProblem("gmn")
    dim = 1 << k
    q = problem.hermitian_variable("Q", dim)
    q_expr = MatExpr.from_hermitian_variable(q, num_qubits=k)
    eye = MatExpr.constant(np.eye(dim), k)
    for part in all_bipartitions(k):
        r = problem.hermitian_variable("R_" + "".join(map(str, part.side_a)), dim)
        r_expr = MatExpr.from_hermitian_variable(r, num_qubits=k)
        r_pt = r_expr.partial_transpose([s - 1 for s in part.side_a])
        problem.add_lmi(q_expr - r_pt)
        if cap_slack:
            problem.add_lmi(eye - q_expr + r_pt)
        problem.add_lmi(r_expr)
        problem.add_lmi(eye - r_expr)
    problem.maximize(-1.0 * ScalarExpr.trace_product(q_expr, mat))
    return problem


def _accept_solution(sol, context):
    if sol.status == "optimal":
        return
    if sol.status == "max_iterations" and sol.info["mu"] <= 1e-6 and sol.info["rd"] <= 1e-8:
        # degenerate optimal face (rank-deficient targets): the objective has
        # converged even though the multiplier certificate has not
        return
    raise GmnSolverError(f"{context}: solver returned status {sol.status!r}")


def gmn_sdp(rho: DensityMatrix, cap_slack=False) -> GmnResult:
    """GMN through the witness SDP; equals gmn_pure on pure states and the
    plain negativity on two qubits."""
    k = rho.num_qubits
    if k > GMN_SDP_MAX_QUBITS:
        raise ValueError(f"the SDP route is capped at {GMN_SDP_MAX_QUBITS} qubits")
    sol = solve(_gmn_sdp_problem(rho.matrix, k, cap_slack=cap_slack))
    _accept_solution(sol, "gmn_sdp")
    return GmnResult(max(sol.primal_value, -1e-9), "sdp")


# ---------------------------------------------------------------------------
# Accessible quantitative witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WitnessOperator:
    k: int
    group: tuple
    phase: int
    coefficients: np.ndarray
    bound_at_design: float
    certificates: dict = field(default=None, compare=False, repr=False)
    design_meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        if np.max(np.abs(coeffs)) > 1.0 + 1e-8:
            raise ValueError("witness coefficients must lie in [-1, 1]")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "group", tuple(int(s) for s in self.group))

    def basis(self) -> ProjectorBasis:
        return ProjectorBasis(self.k, self.phase)

    def matrix(self) -> np.ndarray:
        basis = self.basis()
        vecs = basis.vectors()
        return np.einsum("n,ni,nj->ij", self.coefficients, vecs, vecs.conj())

    def nonzero_count(self, threshold=SPARSITY_THRESHOLD) -> int:
        return int(np.count_nonzero(np.abs(self.coefficients) > threshold))


def validate_probabilities(probs, basis: ProjectorBasis, tol=1e-9):
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (len(basis),):
        raise ValueError("one probability per basis element required")
    if np.min(probs) < -tol:
        raise ValueError("negative probabilities")
    per_setting = probs.reshape(27, 1 << basis.k).sum(axis=1)
    if np.max(np.abs(per_setting - 1.0)) > tol:
        raise ValueError("per-setting outcome probabilities must sum to one")
    return probs


def probabilities_as_vector(target_probs, basis: ProjectorBasis):
    if isinstance(target_probs, dict):
        out = np.zeros(len(basis))
        for n, el in enumerate(basis.elements):
            key = (el.outcome, "".join(str(a) for a in el.alpha))
            out[n] = target_probs[key]
        return out
    return np.asarray(target_probs, dtype=float)


def target_probabilities(state, group, basis: ProjectorBasis | None = None):
    """Exact model probabilities of every basis element for a group of
    consecutive sites of a full-register state."""
    group = tuple(int(s) for s in group)
    basis = basis or ProjectorBasis(len(group), (group[0] - 1) % 3)
    rho = reduce_state(state, group)
    return basis.probabilities(rho)


def _witness_problem(basis, probs, prev_coeffs=None, epsilon=None, weights=None):
    """Either the design SDP (Eq. with max -c.p) or one reweighted-l1 step."""
    k = basis.k
    dim = 1 << k
    n = len(basis)
    problem = SdpProblem("witness")
    c = problem.real_variable("c", n, lower=-1.0, upper=1.0)
    projectors = [basis.projector(i) for i in range(n)]
    q_pos = MatExpr.from_real_combination(c, projectors, num_qubits=k)
    q_neg = -1.0 * q_pos
    eye = MatExpr.constant(np.eye(dim), k)

    sparsifying = weights is not None
    if sparsifying:
        t = problem.real_variable("t", n, lower=0.0)
        # |c_n| <= t_n via two scalar bounds per element
        for sign in (1.0, -1.0):
            rows = np.eye(n)
            for i in range(n):
                problem.add_scalar_bound(
                    ScalarExpr(0.0, {"t": rows[i], "c": sign * rows[i]})
                )
        # bound degradation at most epsilon against the original witness
        shift = float(prev_coeffs @ probs)
        problem.add_scalar_bound(
            ScalarExpr(epsilon + shift, {"c": -probs})
        )
        problem.maximize(ScalarExpr.of_real_variable(t, -weights))
    else:
        problem.maximize(ScalarExpr.of_real_variable(c, -probs))

    for part in all_bipartitions(k):
        r = problem.hermitian_variable("R_" + "".join(map(str, part.side_a)), dim)
        r_expr = MatExpr.from_hermitian_variable(r, num_qubits=k)
        r_pt = r_expr.partial_transpose([s - 1 for s in part.side_a])
        problem.add_lmi(q_pos + (-1.0) * r_pt)
        problem.add_lmi(eye + q_neg + r_pt)  # slack K_A = Q - R^Ta <= 1
        problem.add_lmi(r_expr)
        problem.add_lmi(eye - r_expr)
    return problem


def _extract_certificates(sol, k):
    certs = {}
    for name, value in sol.variable_values.items():
        if name.startswith("R_"):
            side = tuple(int(ch) for ch in name[2:])
            certs[side] = value
    return certs


def design_witness(target_probs, basis: ProjectorBasis, group=None) -> WitnessOperator:
    """Best accessible lower-bound witness for the target probabilities.

    Targets must come from a (simulated) quantum state; measured
    frequencies are statistically noisy and generally infeasible.
    """
    probs = validate_probabilities(probabilities_as_vector(target_probs, basis), basis)
    problem = _witness_problem(basis, probs)
    sol = solve(problem)
    _accept_solution(sol, "design_witness")
    coeffs = np.clip(sol.variable_values["c"], -1.0, 1.0)
    group = tuple(group) if group else tuple(range(1, basis.k + 1))
    return WitnessOperator(
        k=basis.k,
        group=group,
        phase=basis.offset,
        coefficients=coeffs,
        bound_at_design=float(-coeffs @ probs),
        certificates=_extract_certificates(sol, basis.k),
        design_meta={"solver_status": sol.status, "iterations": sol.iterations},
    )


def sparsify_witness(witness: WitnessOperator, target_probs, epsilon=DEFAULT_EPSILON,
                     iterations=DEFAULT_L1_ITERATIONS) -> WitnessOperator:
    """Reweighted l1 sparsification; the bound may drop by at most epsilon."""
    basis = witness.basis()
    probs = validate_probabilities(probabilities_as_vector(target_probs, basis), basis)
    original = np.asarray(witness.coefficients, dtype=float)
    current = original.copy()
    certificates = witness.certificates
    for _ in range(iterations):
        weights = 1.0 / (np.abs(current) + epsilon)
        problem = _witness_problem(
            basis, probs, prev_coeffs=original, epsilon=epsilon, weights=weights
        )
        try:
            sol = solve(problem)
            _accept_solution(sol, "sparsify_witness")
        except (SdpError, GmnSolverError):
            break  # keep the last feasible iterate
        current = np.clip(sol.variable_values["c"], -1.0, 1.0)
        certificates = _extract_certificates(sol, basis.k)
    return WitnessOperator(
        k=witness.k,
        group=witness.group,
        phase=witness.phase,
        coefficients=current,
        bound_at_design=float(-current @ probs),
        certificates=certificates,
        design_meta=dict(witness.design_meta, sparsified=True),
    )


def verify_witness(witness: WitnessOperator, tol=1e-6) -> bool:
    """Independent eigenvalue re-check of the feasibility certificates."""
    q = witness.matrix()
    k = witness.k
    certs = witness.certificates
    if certs is None:
        raise ValueError("witness carries no certificates (loaded from JSON?)")
    from .states import partial_transpose

    for part in all_bipartitions(k):
        r = certs[part.side_a]
        r_eigs = np.linalg.eigvalsh(r)
        if r_eigs[0] < -tol or r_eigs[-1] > 1.0 + tol:
            return False
        slack = q - partial_transpose(r, part)
        s_eigs = np.linalg.eigvalsh(slack)
        if s_eigs[0] < -tol or s_eigs[-1] > 1.0 + tol:
            return False
    return True


# ---------------------------------------------------------------------------
# Evaluation on measured counts
# ---------------------------------------------------------------------------

def _matching_tables(tables, element_axes, group):
    out = []
    for table in tables:
        axes = table.setting.axes
        if all(axes[s - 1] is a for s, a in zip(group, element_axes)):
            out.append(table)
    return out


def measured_probabilities(tables, witness_or_basis, group=None):
    """Marginal frequencies of every basis element, pooled over settings."""
    if isinstance(witness_or_basis, WitnessOperator):
        basis = witness_or_basis.basis()
        group = witness_or_basis.group
    else:
        basis = witness_or_basis
        group = tuple(group)
    k = basis.k
    dim = 1 << k
    pooled = {}
    for table in tables:
        axes = tuple(table.setting.axes[s - 1] for s in group)
        if axes not in pooled:
            pooled[axes] = [np.zeros(dim), 0]
        bucket = pooled[axes]
        bucket[1] += table.shots
        vec = bucket[0]
        for key, count in table.counts.items():
            idx = 0
            for s in group:
                idx = (idx << 1) | (key[s - 1] == "1")
            vec[idx] += count
    out = np.zeros(len(basis))
    for n, el in enumerate(basis.elements):
        axes = el.axes(k, basis.offset)
        bucket = pooled.get(axes)
        if bucket is None:
            label = "".join(str(a) for a in el.alpha)
            raise ValueError(f"no setting measures basis {label} on group {group}")
        out[n] = bucket[0][int(el.outcome, 2)] / bucket[1]
    return out


def evaluate_witness(witness: WitnessOperator, tables, resamples=200, seed=0) -> GmnResult:
    """S = -sum c_n p_n with measured marginals; may be negative."""
    from .measure import bootstrap

    coeffs = witness.coefficients
    value = float(-coeffs @ measured_probabilities(tables, witness))

    def stat(resampled):
        return float(-coeffs @ measured_probabilities(resampled, witness))

    _, std = bootstrap(tables, stat, resamples, seed=seed)
    return GmnResult(value, "witness_evaluation", witness=witness, std_error=float(std))


def evaluate_witness_on_probabilities(witness: WitnessOperator, probs) -> GmnResult:
    probs = probabilities_as_vector(probs, witness.basis())
    value = float(-np.asarray(witness.coefficients) @ probs)
    return GmnResult(value, "witness_evaluation", witness=witness, std_error=0.0)


# ---------------------------------------------------------------------------
# Sweep over time steps and groups
# ---------------------------------------------------------------------------

def witness_sweep(counts_by_time, k_values, models, design_from="mixed_model",
                  evaluate_data=True, sparsify=True, epsilon=DEFAULT_EPSILON,
                  resamples=200, seed=0):
    """Design per (time, group) witnesses on model targets and evaluate.

    counts_by_time: sequence of (t_ms, tables); models: name -> {t_ms: state}
    with full-register model states (the design target comes from
    models[design_from]).  Returns rows shaped like the sweep CSV.
    """
    rows = []
    for t_ms, tables in counts_by_time:
        n = tables[0].setting.num_qubits
        design_states = models[design_from]
        for k in k_values:
            for start in range(1, n - k + 2):
                group = tuple(range(start, start + k))
                basis = ProjectorBasis(k, (start - 1) % 3)
                target = target_probabilities(design_states[t_ms], group, basis)
                witness = design_witness(target, basis, group=group)
                if sparsify:
                    witness = sparsify_witness(witness, target, epsilon=epsilon)
                if evaluate_data:
                    stream = (seed, int(round(1000 * t_ms)), start, k)
                    res = evaluate_witness(
                        witness, tables, resamples=resamples, seed=stream
                    )
                    rows.append(_sweep_row(t_ms, k, start, res, "data"))
                for name, states in models.items():
                    probs = target_probabilities(states[t_ms], group, basis)
                    res = evaluate_witness_on_probabilities(witness, probs)
                    rows.append(_sweep_row(t_ms, k, start, res, name))
    return rows


def _sweep_row(t_ms, k, start, result, source):
    return {
        "t_ms": float(t_ms),
        "k": k,
        "group_start": start,
        "S": result.value,
        "std_error": result.std_error if result.std_error is not None else 0.0,
        "source": source,
    }


# ---------------------------------------------------------------------------
# Witness persistence
# ---------------------------------------------------------------------------

def witness_to_json(witness: WitnessOperator) -> str:
    entries = [
        {
            "s": el.outcome,
            "alpha": "".join(str(a) for a in el.alpha),
            "c": float(c),
        }
        for el, c in zip(witness.basis().elements, witness.coefficients)
        if abs(c) > 1e-12
    ]
    return json.dumps(
        {
            "k": witness.k,
            "group": list(witness.group),
            "phase": witness.phase,
            "coefficients": entries,
            "bound_at_design": witness.bound_at_design,
            "design_meta": witness.design_meta,
        }
    )


def witness_from_json(text: str) -> WitnessOperator:
    payload = json.loads(text)
    k = int(payload["k"])
    phase = int(payload["phase"])
    basis = ProjectorBasis(k, phase)
    index = {
        (el.outcome, "".join(str(a) for a in el.alpha)): n
        for n, el in enumerate(basis.elements)
    }
    coeffs = np.zeros(len(basis))
    for entry in payload["coefficients"]:
        coeffs[index[(entry["s"], entry["alpha"])]] = entry["c"]
    return WitnessOperator(
        k=k,
        group=tuple(payload["group"]),
        phase=phase,
        coefficients=coeffs,
        bound_at_design=float(payload["bound_at_design"]),
        design_meta=payload.get("design_meta", {}),
    )
