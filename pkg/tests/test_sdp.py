import numpy as np
import pytest

from gmewit.sdp import (
    MatExpr,
    ScalarExpr,
    SdpProblem,
    export_sdpa,
    import_sdpa,
    solve,
    solve_compiled,
)
from gmewit.states import all_bipartitions, named_state


def box_problem():
    p = SdpProblem("box")
    x = p.hermitian_variable("X", 2)
    ex = MatExpr.from_hermitian_variable(x)
    p.add_lmi(ex)
    p.add_lmi(MatExpr.constant(np.eye(2)) - ex)
    p.maximize(ScalarExpr.trace_product(ex, np.eye(2)))
    return p


def eigenvalue_problem(a):
    p = SdpProblem("eig")
    t = p.real_variable("t", 1)
    expr = MatExpr.from_real_combination(t, [np.eye(a.shape[0])]) - MatExpr.constant(a)
    p.add_lmi(expr)
    p.minimize(ScalarExpr.of_real_variable(t, [1.0]))
    return p


def gmn_problem(rho, k):
    p = SdpProblem("gmn")
    d = 1 << k
    q = p.hermitian_variable("Q", d)
    qexpr = MatExpr.from_hermitian_variable(q, num_qubits=k)
    for part in all_bipartitions(k):
        r = p.hermitian_variable("R_" + "".join(map(str, part.side_a)), d)
        rexpr = MatExpr.from_hermitian_variable(r, num_qubits=k)
        p.add_lmi(qexpr - rexpr.partial_transpose([s - 1 for s in part.side_a]))
        p.add_lmi(rexpr)
        p.add_lmi(MatExpr.constant(np.eye(d), k) - rexpr)
    p.maximize(-1.0 * ScalarExpr.trace_product(qexpr, rho))
    return p


def random_hermitian(dim, rng):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (g + g.conj().T)


def test_box_problem():
    sol = solve(box_problem())
    assert sol.status == "optimal"
    assert sol.primal_value == pytest.approx(2.0, abs=1e-7)
    assert np.allclose(sol.variable_values["X"], np.eye(2), atol=1e-6)
    assert sol.duality_gap <= 1e-7


def test_eigenvalue_problems_match_closed_form():
    rng = np.random.default_rng(11)
    for dim in (2, 3, 4, 6):
        a = random_hermitian(dim, rng)
        sol = solve(eigenvalue_problem(a))
        assert sol.status == "optimal"
        lam = np.linalg.eigvalsh(a)[-1]
        assert abs(-sol.primal_value - lam) <= 1e-7


def test_bell_state_gmn_value():
    rho = named_state("bell_phi_plus", 2).density_matrix().matrix
    sol = solve(gmn_problem(rho, 2))
    assert sol.primal_value == pytest.approx(0.5, abs=1e-6)
    assert sol.duality_gap <= 1e-7


def test_weak_duality_along_the_trajectory():
    sol = solve(gmn_problem(named_state("ghz", 3).density_matrix().matrix, 3))
    for rec in sol.info["trajectory"]:
        if rec["rp"] <= 1e-7 and rec["rd"] <= 1e-7:
            assert rec["dobj"] - rec["pobj"] >= -1e-7


def test_determinism():
    prob = gmn_problem(named_state("ghz", 3).density_matrix().matrix, 3)
    a = solve(prob)
    b = solve(prob)
    assert a.iterations == b.iterations
    assert np.array_equal(a.info["y"], b.info["y"])
    assert a.primal_value == b.primal_value


def test_scalar_equalities():
    p = SdpProblem("eq")
    v = p.real_variable("v", 2, lower=-10.0, upper=3.0)
    p.add_equality(ScalarExpr.of_real_variable(v, [1.0, -1.0]))
    p.maximize(ScalarExpr.of_real_variable(v, [1.0, 1.0]))
    sol = solve(p)
    assert sol.status == "optimal"
    assert sol.primal_value == pytest.approx(6.0, abs=1e-6)
    assert np.allclose(sol.variable_values["v"], [3.0, 3.0], atol=1e-6)


def test_infeasible_problem_is_reported():
    p = SdpProblem("bad")
    v = p.real_variable("v", 1)
    p.add_scalar_bound(ScalarExpr(-1.0, {}))
    p.add_scalar_bound(ScalarExpr.of_real_variable(v, [1.0]))
    p.maximize(ScalarExpr.of_real_variable(v, [0.0]))
    sol = solve(p, max_iterations=80)
    assert sol.status == "infeasible"


def test_iteration_cap_reported():
    rho = named_state("ghz", 3).density_matrix().matrix
    sol = solve(gmn_problem(rho, 3), max_iterations=3)
    assert sol.status == "max_iterations"


def test_export_empty_problem_has_minimal_header():
    p = SdpProblem("empty")
    v = p.real_variable("v", 1)
    p.maximize(ScalarExpr.of_real_variable(v, [1.0]))
    text = export_sdpa(p)
    lines = [l for l in text.splitlines() if not l.startswith('"')]
    assert lines[0].startswith("1 =") and lines[1].startswith("0 =")


def test_export_import_roundtrip_eigenvalue():
    rng = np.random.default_rng(5)
    a = random_hermitian(2, rng)
    prob = eigenvalue_problem(a)
    direct = solve(prob)
    comp = import_sdpa(export_sdpa(prob))
    _, _, _, status, last, _, _ = solve_compiled(comp)
    assert status == "optimal"
    assert last["pobj"] == pytest.approx(direct.primal_value, abs=1e-7)


def test_gmn_export_block_structure():
    rho = named_state("ghz", 3).density_matrix().matrix
    text = export_sdpa(gmn_problem(rho, 3))
    lines = [l for l in text.splitlines() if not l.startswith('"')]
    struct = lines[2]
    # one 16x16 embedded block per bipartition constraint (plus the R bound
    # blocks): 3 bipartitions x 3 LMIs
    assert struct.count("16") == 9


def test_solution_invariants_on_suite_problems():
    rng = np.random.default_rng(23)
    problems = [box_problem(), eigenvalue_problem(random_hermitian(4, rng)),
                gmn_problem(named_state("bell_phi_plus", 2).density_matrix().matrix, 2)]
    for prob in problems:
        sol = solve(prob)
        assert sol.status == "optimal"
        assert sol.duality_gap <= 1e-7
        assert sol.info["rp"] <= 1e-8
        assert sol.info["rd"] <= 1e-8


def test_against_cvxopt_when_available():
    cvxopt = pytest.importorskip("cvxopt")
    from cvxopt import matrix, solvers
    from gmewit.sdp.solver import compile_problem
    from scipy import sparse as sp

    rng = np.random.default_rng(31)
    problems = [
        ("eig", eigenvalue_problem(random_hermitian(4, rng))),
        ("gmn2", gmn_problem(named_state("bell_phi_plus", 2).density_matrix().matrix, 2)),
    ]
    solvers.options["show_progress"] = False
    for name, prob in problems:
        comp = compile_problem(prob)
        c = matrix(-comp.b)
        gl_rows, hl = [], []
        gs, hs = [], []
        for block in comp.blocks:
            full = np.zeros((comp.m, block.size * block.size if block.kind == "dense" else block.size))
            for gi, mat in block.terms:
                _, off, n = comp.groups[gi]
                full[off : off + n] = mat.toarray() if sp.issparse(mat) else mat
            if block.kind == "dense":
                gs.append(matrix(-full.T))
                hs.append(matrix(block.const))
            else:
                gl_rows.append(-full.T)
                hl.append(block.const)
        kwargs = {"Gs": gs, "hs": hs}
        if gl_rows:
            kwargs["Gl"] = matrix(np.vstack(gl_rows))
            kwargs["hl"] = matrix(np.concatenate(hl))
        sol_ext = solvers.sdp(c, **kwargs)
        assert sol_ext["status"] == "optimal"
        ours = solve(prob)
        assert ours.primal_value == pytest.approx(-sol_ext["primal objective"], abs=1e-6), name
