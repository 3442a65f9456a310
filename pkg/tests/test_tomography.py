import itertools

import numpy as np
import pytest

from gmewit.measure import CountsTable, MeasurementSetting, born_probabilities, sample, scheme_settings
from gmewit.states import (
    Bipartition,
    PauliAxis,
    named_state,
    negativity,
    uhlmann_fidelity,
)
from gmewit.tomography import (
    TomographyInput,
    TomographyWarning,
    mle_reconstruct,
    mle_reconstruct_info,
    pair_negativity_sweep,
)

AXES3 = (PauliAxis.X, PauliAxis.Y, PauliAxis.Z)


def two_qubit_bases():
    return [MeasurementSetting(axes) for axes in itertools.product(AXES3, repeat=2)]


def exact_tables(state, settings, shots):
    """Counts proportional to exact Born probabilities (shots chosen so the
    products are integers)."""
    tables = []
    for setting in settings:
        probs = born_probabilities(state, setting)
        n = setting.num_qubits
        counts = {}
        for idx, p in enumerate(probs):
            c = p * shots
            if c > 1e-9:
                if abs(c - round(c)) > 1e-6:
                    raise AssertionError("choose shots making counts integral")
                counts[format(idx, f"0{n}b")] = int(round(c))
        tables.append(CountsTable(setting, counts, shots))
    return tables


def test_exact_bell_frequencies_recover_the_state():
    phi = named_state("bell_phi_plus", 2)
    tables = exact_tables(phi, two_qubit_bases(), 4000)
    rho = mle_reconstruct(TomographyInput(tuple(tables), (1, 2)))
    assert uhlmann_fidelity(rho, phi) >= 1.0 - 1e-6


def test_uniform_counts_give_maximally_mixed():
    tables = []
    for setting in two_qubit_bases():
        counts = {format(i, "02b"): 250 for i in range(4)}
        tables.append(CountsTable(setting, counts, 1000))
    rho = mle_reconstruct(TomographyInput(tuple(tables), (1, 2)))
    assert np.max(np.abs(rho.matrix - np.eye(4) / 4)) < 1e-6


def test_sampled_bell_reconstruction_accuracy():
    phi = named_state("bell_phi_plus", 2)
    truth = phi.density_matrix().matrix
    distances = []
    for seed in range(50):
        tables = [
            sample(phi, s, 1000, seed=(seed, i))
            for i, s in enumerate(two_qubit_bases())
        ]
        rho = mle_reconstruct(TomographyInput(tuple(tables), (1, 2)))
        diff = np.linalg.eigvalsh(rho.matrix - truth)
        distances.append(0.5 * np.abs(diff).sum())
    assert np.quantile(distances, 0.95) <= 0.08


def test_loglikelihood_is_monotone():
    w = named_state("w", 3)
    tables = [
        sample(w, s, 300, seed=(5, i)) for i, s in enumerate(scheme_settings(3))
    ]
    _, info = mle_reconstruct_info(TomographyInput(tuple(tables), (1, 2, 3)))
    hist = np.array(info["loglik_history"])
    assert np.all(np.diff(hist) >= -1e-9)
    assert info["converged"]


def test_predicted_frequencies_match_at_large_shots():
    from gmewit.tomography import _local_projectors

    w = named_state("w", 3)
    settings = scheme_settings(3)
    tables = [sample(w, s, 100_000, seed=(7, i)) for i, s in enumerate(settings)]
    rho = mle_reconstruct(TomographyInput(tuple(tables), (1, 2, 3)))
    for table in tables:
        projs = _local_projectors(table.setting.axes)
        tvd = 0.0
        for key, proj in projs.items():
            p = float(np.real(np.trace(rho.matrix @ proj)))
            tvd += abs(table.counts.get(key, 0) / table.shots - p)
        assert 0.5 * tvd <= 0.01


def test_incomplete_bases_rejected():
    phi = named_state("bell_phi_plus", 2)
    tables = exact_tables(phi, two_qubit_bases()[:-1], 4000)
    with pytest.raises(ValueError, match="missing local bases"):
        TomographyInput(tuple(tables), (1, 2))


def test_more_than_three_sites_rejected():
    with pytest.raises(ValueError, match="witness pipeline"):
        TomographyInput((), (1, 2, 3, 4))


def test_nonconvergence_warns():
    phi = named_state("bell_phi_plus", 2)
    tables = [
        sample(phi, s, 500, seed=(3, i)) for i, s in enumerate(two_qubit_bases())
    ]
    with pytest.warns(TomographyWarning):
        mle_reconstruct(TomographyInput(tuple(tables), (1, 2)), max_iterations=2)


def test_pair_negativity_sweep_on_product_and_bell():
    neel = named_state("neel", 4)
    settings = scheme_settings(4)
    tables = [sample(neel, s, 400, seed=(1, i)) for i, s in enumerate(settings)]
    rows = pair_negativity_sweep([(0.0, tables)], resamples=100, seed=9)
    assert len(rows) == 3
    for row in rows:
        assert row["negativity"] <= 3 * max(row["std_error"], 1e-3)

    phi = named_state("bell_phi_plus", 2)
    exact = exact_tables(phi, two_qubit_bases(), 4000)
    rho = mle_reconstruct(TomographyInput(tuple(exact), (1, 2)))
    assert negativity(rho, Bipartition((1,), 2)) == pytest.approx(0.5, abs=1e-5)
