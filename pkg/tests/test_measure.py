import itertools

import numpy as np
import pytest

from gmewit.measure import (
    CorrelatorEstimate,
    CountsTable,
    MeasurementSetting,
    bootstrap,
    born_probabilities,
    covariance,
    estimate_correlator,
    estimate_probability,
    read_counts_jsonl,
    sample,
    scheme_covers_neighbouring_triplets,
    scheme_settings,
    setting_seed,
    write_counts_jsonl,
)
from gmewit.states import PauliAxis, PauliString, PureState, named_state


def test_scheme_is_all_axis_triples_for_three_sites():
    settings = scheme_settings(3)
    assert len(settings) == 27
    got = {s.axes for s in settings}
    want = set(itertools.product((PauliAxis.X, PauliAxis.Y, PauliAxis.Z), repeat=3))
    assert got == want


def test_scheme_period_three_rule():
    s = MeasurementSetting.from_label("XYZ", 6)
    assert tuple(str(a) for a in s.axes) == ("X", "Y", "Z", "X", "Y", "Z")
    for n in (4, 7, 20):
        for setting in scheme_settings(n):
            for i in range(n - 3):
                assert setting.axes[i] is setting.axes[i + 3]


def test_scheme_covers_all_neighbouring_triplets_at_n20():
    settings = scheme_settings(20)
    assert scheme_covers_neighbouring_triplets(settings, 20)


def test_sampling_is_deterministic_and_eigenstates_are_sharp():
    vac = PureState.from_bitstring("000")
    setting = MeasurementSetting.from_label("ZZZ", 3)
    t1 = sample(vac, setting, 500, seed=42)
    t2 = sample(vac, setting, 500, seed=42)
    assert t1.counts == t2.counts == {"000": 500}
    t3 = sample(vac, setting, 500, seed=setting_seed(7, 3))
    t4 = sample(vac, setting, 500, seed=setting_seed(7, 3))
    assert t3.counts == t4.counts


def test_plus_state_is_unbiased_in_z():
    plus = PureState(np.array([1.0, 1.0]) / np.sqrt(2), 1)
    table = sample(plus, MeasurementSetting((PauliAxis.Z,)), 100_000, seed=5)
    freq = table.counts.get("0", 0) / table.shots
    sigma = np.sqrt(0.25 / table.shots)
    assert abs(freq - 0.5) < 5 * sigma


def test_bell_state_in_xx_setting_is_perfectly_correlated():
    phi = named_state("bell_phi_plus", 2)
    table = sample(phi, MeasurementSetting((PauliAxis.X, PauliAxis.X)), 2000, seed=1)
    assert set(table.counts) <= {"00", "11"}
    est = estimate_correlator([table], PauliString.two_site(2, 1, "X", 2, "X"))
    assert est.value == 1.0 and est.std_error == 0.0


def test_born_probabilities_of_bell_in_xy():
    # <XY> = 0 on phi+, so all four outcomes are equally likely
    phi = named_state("bell_phi_plus", 2)
    probs = born_probabilities(phi, MeasurementSetting((PauliAxis.X, PauliAxis.Y)))
    assert np.allclose(probs, 0.25)


def test_estimate_probability():
    vac = PureState.from_bitstring("0000")
    table = sample(vac, MeasurementSetting.from_label("ZZZ", 4), 100, seed=0)
    est = estimate_probability(table, (2,), "0")
    assert est.value == 1.0 and est.std_error == 0.0

    uniform = CountsTable(MeasurementSetting.from_label("ZZZ", 3), {"000": 50, "111": 50}, 100)
    assert estimate_probability(uniform, (1, 2, 3), "000").value == 0.5
    assert estimate_probability(uniform, (1, 2, 3), "111").value == 0.5

    neel = sample(named_state("neel", 4), MeasurementSetting.from_label("ZZZ", 4), 250, seed=3)
    assert estimate_probability(neel, (1, 2), "10").value == 1.0


def test_marginal_consistency_is_exact():
    state = named_state("w", 3)
    table = sample(state, MeasurementSetting.from_label("XYZ", 3), 1000, seed=4)
    marg = estimate_probability(table, (1,), "0").value
    total = sum(
        estimate_probability(table, (1, 2), "0" + b).value for b in "01"
    )
    assert marg == pytest.approx(total, abs=0.0)


def test_correlator_on_neel_counts():
    tables = [
        sample(named_state("neel", 4), s, 200, seed=i)
        for i, s in enumerate(scheme_settings(4))
    ]
    z1 = estimate_correlator(tables, PauliString.single_site(4, 1, "Z"))
    assert z1.value == 1.0
    z2 = estimate_correlator(tables, PauliString.single_site(4, 2, "Z"))
    assert z2.value == -1.0
    # 9 of 27 settings measure Z on a given site
    assert len(z1.source_settings) == 9
    assert z1.shots_used == 9 * 200


def test_pooling_two_tables_equals_their_union():
    phi = named_state("bell_phi_plus", 2)
    setting = MeasurementSetting((PauliAxis.Z, PauliAxis.Z))
    a = sample(phi, setting, 500, seed=10)
    b = sample(phi, setting, 500, seed=11)
    union_counts = dict(a.counts)
    for k, c in b.counts.items():
        union_counts[k] = union_counts.get(k, 0) + c
    union = CountsTable(setting, union_counts, 1000)
    ops = PauliString.two_site(2, 1, "Z", 2, "Z")
    pooled = estimate_correlator([a, b], ops)
    single = estimate_correlator([union], ops)
    assert pooled.value == single.value
    assert pooled.std_error == single.std_error
    assert pooled.shots_used == single.shots_used == 1000


def test_missing_setting_raises():
    table = sample(named_state("neel", 4), MeasurementSetting.from_label("ZZZ", 4), 10, seed=0)
    with pytest.raises(ValueError):
        estimate_correlator([table], PauliString.two_site(4, 1, "X", 2, "X"))


def test_covariance_identical_ops_equals_variance():
    state = named_state("w", 3)
    table = sample(state, MeasurementSetting.from_label("ZZZ", 3), 1000, seed=9)
    ops = PauliString.two_site(3, 1, "Z", 2, "Z")
    est = estimate_correlator([table], ops)
    cov = covariance([table], ops, ops)
    assert cov == pytest.approx(est.std_error**2, rel=1e-12)


def test_covariance_of_disjoint_settings_is_zero():
    phi = named_state("bell_phi_plus", 2)
    tx = sample(phi, MeasurementSetting((PauliAxis.X, PauliAxis.X)), 300, seed=1)
    tz = sample(phi, MeasurementSetting((PauliAxis.Z, PauliAxis.Z)), 300, seed=2)
    cov = covariance(
        [tx, tz],
        PauliString.two_site(2, 1, "X", 2, "X"),
        PauliString.two_site(2, 1, "Z", 2, "Z"),
    )
    assert cov == 0.0


def test_covariance_sign_on_shared_setting():
    # GHZ all-Z data: both ZZ products equal +1 on every shot, so the
    # sample covariance vanishes identically.
    ghz = sample(named_state("ghz", 3), MeasurementSetting.from_label("ZZZ", 3), 500, seed=3)
    za = PauliString.two_site(3, 1, "Z", 2, "Z")
    zb = PauliString.two_site(3, 2, "Z", 3, "Z")
    assert covariance([ghz], za, zb) == 0.0

    # (|000> + |111> + |010>)/sqrt(3): the two products fluctuate together.
    amps = np.zeros(8, dtype=complex)
    amps[[0b000, 0b111, 0b010]] = 1.0 / np.sqrt(3.0)
    covary = sample(PureState(amps, 3), MeasurementSetting.from_label("ZZZ", 3), 500, seed=3)
    # per-shot covariance is 1 - (1/3)^2 = 8/9, scaled by the shot count
    assert covariance([covary], za, zb) == pytest.approx(8 / 9 / 500, rel=0.25)


def test_bootstrap_constant_statistic():
    table = sample(named_state("ghz", 3), MeasurementSetting.from_label("ZZZ", 3), 100, seed=0)
    mean, std = bootstrap([table], lambda ts: 1.25, 100, seed=1)
    assert std == 0.0 and mean == 1.25


def test_bootstrap_matches_binomial_error():
    plus = PureState(np.array([1.0, 1.0]) / np.sqrt(2), 1)
    table = sample(plus, MeasurementSetting((PauliAxis.Z,)), 1000, seed=17)

    def phat(tables):
        return estimate_probability(tables[0], (1,), "1").value

    _, std = bootstrap([table], phat, 400, seed=23)
    closed_form = np.sqrt(0.25 / 1000)
    assert abs(std - closed_form) < 0.2 * closed_form


def test_bootstrap_matches_analytic_correlator_variance():
    state = named_state("w", 3)
    table = sample(state, MeasurementSetting.from_label("ZZZ", 3), 1000, seed=29)
    ops = PauliString.two_site(3, 1, "Z", 2, "Z")
    est = estimate_correlator([table], ops)

    def stat(tables):
        return estimate_correlator(tables, ops).value

    _, std = bootstrap([table], stat, 400, seed=31)
    assert abs(std - est.std_error) < 0.2 * est.std_error


def test_two_sigma_coverage_on_partially_correlated_state():
    # <XX> = sin(pi/4) on cos(a)|00> + sin(a)|11> with a = pi/8
    a = np.pi / 8
    amps = np.zeros(4, dtype=complex)
    amps[0b00], amps[0b11] = np.cos(a), np.sin(a)
    state = PureState(amps, 2)
    truth = np.sin(2 * a)
    setting = MeasurementSetting((PauliAxis.X, PauliAxis.X))
    ops = PauliString.two_site(2, 1, "X", 2, "X")
    hits = 0
    for seed in range(200):
        est = estimate_correlator([sample(state, setting, 1000, seed=seed)], ops)
        if abs(est.value - truth) <= 2 * est.std_error:
            hits += 1
    assert hits >= 0.9 * 200


def test_counts_jsonl_roundtrip(tmp_path):
    state = named_state("w", 3)
    tables = [
        sample(state, s, 100, seed=setting_seed(1, i))
        for i, s in enumerate(scheme_settings(3))
    ]
    path = tmp_path / "counts.jsonl"
    write_counts_jsonl(tables, path)
    back = read_counts_jsonl(path)
    assert len(back) == 27
    for orig, rec in zip(tables, back):
        assert rec.counts == orig.counts
        assert rec.shots == orig.shots
        assert rec.setting.axes == orig.setting.axes
        assert rec.setting.label == orig.setting.label


def test_bad_jsonl_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"label": null, "axes": ["Z"], "shots": 2, "counts": {"0": 1}}\n')
    with pytest.raises(ValueError, match="bad.jsonl:1"):
        read_counts_jsonl(path)


def test_estimate_bounds_validation():
    with pytest.raises(ValueError):
        CorrelatorEstimate(1.5, 0.0, 10)
    with pytest.raises(ValueError):
        CorrelatorEstimate(0.5, 1.5, 10)
