import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import coffin_manson_mp
from relmap.reliability import (
    SECONDS_PER_YEAR,
    AgingParams,
    ModelDomainError,
    MTTFReport,
    ReliabilityParams,
    TCParams,
    ThermalCycle,
    aging_rates,
    combined_mttf,
    core_lifetimes,
    cycles_to_failure,
    effective_lifetime,
    evaluate_trace,
    mttf_em,
    mttf_hci,
    mttf_nbti,
    mttf_tc,
    rainflow,
    rainflow_ranges,
    reversals,
)

UNIT_TC = TCParams(a_tc=1.0)


# -- rainflow -----------------------------------------------------------------


def test_monotone_series_is_one_half_cycle():
    cyc = rainflow([300.0, 301.0, 305.0, 309.5, 312.0])
    assert len(cyc) == 1
    assert cyc[0].weight == 0.5 and cyc[0].amplitude == 12.0 and cyc[0].t_max == 312.0


def test_up_down_counts_one_range_of_twenty():
    cyc = rainflow([40.0, 60.0, 40.0])
    assert {c.amplitude for c in cyc} == {20.0}
    assert sum(c.weight for c in cyc) == 1.0


def test_interior_cycle_is_full():
    # the 325-315 excursion closes inside the larger 300-340 swing
    cyc = rainflow([300.0, 325.0, 315.0, 340.0, 300.0])
    full = [c for c in cyc if c.weight == 1.0]
    assert [(c.amplitude, c.t_max) for c in full] == [(10.0, 325.0)]
    assert full[0].duration == 2.0  # twice the reversal spacing


def test_reversals_collapse_plateaus():
    v, t = reversals([1.0, 1.0, 2.0, 2.0, 2.0, 0.0, 0.0, 3.0])
    assert v.tolist() == [1.0, 2.0, 0.0, 3.0]
    assert t.tolist() == [0.0, 2.0, 5.0, 7.0]


def test_rainflow_objects_match_ranges():
    rng = np.random.default_rng(4)
    x = 320 + np.cumsum(rng.normal(size=300))
    rows = rainflow_ranges(x, 0.5)
    objs = rainflow(x, 0.5)
    assert [(c.amplitude, c.t_max, c.duration, c.weight) for c in objs] == [tuple(r) for r in rows.tolist()]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(300, 340), min_size=2, max_size=40))
def test_rainflow_weights_cover_every_reversal(seq):
    # every interior reversal closes exactly one half-range on each side
    cyc = rainflow([float(v) for v in seq])
    v, _ = reversals([float(x) for x in seq])
    assert sum(2 * c.weight for c in cyc) == pytest.approx(max(len(v) - 1, 0))


def test_rainflow_needs_two_samples():
    with pytest.raises(ValueError):
        rainflow([300.0])


# -- thermal cycling ----------------------------------------------------------


def test_unit_base_cycle():
    c = ThermalCycle(amplitude=2.0, t_max=340.0, duration=1.0)
    expected = math.exp(0.42 / (8.62e-5 * 340.0))
    assert cycles_to_failure(c, UNIT_TC) == pytest.approx(expected, rel=1e-15)


def test_pinned_coffin_manson_value():
    got = cycles_to_failure(ThermalCycle(10.0, 350.0, 1.0), UNIT_TC)
    ref = coffin_manson_mp(10, 350)
    assert abs(got - float(ref)) / float(ref) < 1e-3
    assert got == pytest.approx(6.36e3, rel=1e-3)


def test_a_tc_is_linear():
    c = ThermalCycle(7.5, 333.0, 1.0)
    assert cycles_to_failure(c, TCParams(a_tc=2.0)) == pytest.approx(2 * cycles_to_failure(c, UNIT_TC), rel=1e-15)


def test_sub_threshold_cycle_is_harmless():
    assert cycles_to_failure(ThermalCycle(0.8, 330.0, 1.0), UNIT_TC) is None
    assert mttf_tc([ThermalCycle(0.8, 330.0, 1.0)], UNIT_TC) == math.inf
    assert mttf_tc([], UNIT_TC) == math.inf


def _params_for_n(n_target, amp=2.0, t_max=340.0):
    # with amplitude t_th + 1 the base term is 1, so a_tc sets N directly
    return TCParams(a_tc=n_target / math.exp(0.42 / (8.62e-5 * t_max)))


def test_identical_cycles_reduce_to_closed_form():
    p = _params_for_n(1000.0)
    cycles = [ThermalCycle(2.0, 340.0, 2.0)] * 4
    seconds = mttf_tc(cycles, p) * SECONDS_PER_YEAR
    assert seconds == pytest.approx(1000 * 8 / 4, rel=1e-12)


def test_single_cycle_lifetime():
    p = _params_for_n(1234.0)
    seconds = mttf_tc([ThermalCycle(2.0, 340.0, 3.5)], p) * SECONDS_PER_YEAR
    assert seconds == pytest.approx(1234.0 * 3.5, rel=1e-12)


def test_mixed_cycles_follow_miner():
    p = _params_for_n(1000.0)
    amp_hundred = 1.0 + 10 ** (1 / 2.35)  # ten times the damage of the first cycle
    cycles = [ThermalCycle(2.0, 340.0, 2.0), ThermalCycle(amp_hundred, 340.0, 2.0)]
    assert cycles_to_failure(cycles[1], p) == pytest.approx(100.0, rel=1e-12)
    seconds = mttf_tc(cycles, p) * SECONDS_PER_YEAR
    assert seconds == pytest.approx(4 / (1 / 1000 + 1 / 100), rel=1e-12)
    assert seconds == pytest.approx(363.6, abs=0.05)


def test_calibrated_reference_cycle_gives_nominal_life():
    p = TCParams(ref_temp=318.0, ref_amplitude=20.0, ref_period=60.0, nominal_years=7.0)
    ref = ThermalCycle(20.0, 338.0, 60.0)
    assert mttf_tc([ref] * 10, p) == pytest.approx(7.0, rel=1e-12)


@settings(max_examples=1000, deadline=None)
@given(
    dt=st.floats(1.5, 80.0),
    t_max=st.floats(300.0, 400.0),
    bump=st.floats(0.01, 5.0),
)
def test_coffin_manson_strictly_decreasing(dt, t_max, bump):
    n = cycles_to_failure(ThermalCycle(dt, t_max, 1.0), UNIT_TC)
    assert cycles_to_failure(ThermalCycle(dt + bump, t_max, 1.0), UNIT_TC) < n
    assert cycles_to_failure(ThermalCycle(dt, t_max + bump, 1.0), UNIT_TC) < n


# -- NBTI / HCI / EM -------------------------------------------------------------


def nbti_mp(T, p: AgingParams):
    with mpmath.workdps(40):
        T = mpmath.mpf(T)
        k = mpmath.mpf(p.k)
        x = mpmath.mpf(p.nbti_a) / (1 + 2 * mpmath.exp(mpmath.mpf(p.nbti_b) / (k * T)))
        shape = (mpmath.log(x) - mpmath.log(x - mpmath.mpf(p.nbti_c))) * (
            T / mpmath.exp(-mpmath.mpf(p.nbti_d) / (k * T))
        ) ** mpmath.mpf(p.nbti_beta)
        return float(shape)


def test_nbti_ordering():
    p = AgingParams()
    assert mttf_nbti(380.0, p) < mttf_nbti(340.0, p) < mttf_nbti(300.0, p)


def test_nbti_pinned_at_350():
    p = AgingParams()
    want = p.nominal_years * nbti_mp(350.0, p) / nbti_mp(p.ref_temp, p)
    assert mttf_nbti(350.0, p) == pytest.approx(want, rel=1e-12)
    assert mttf_nbti(350.0, p) == pytest.approx(5.187371332941839, rel=1e-12)  # pinned regression value


def test_hci_examples():
    p = AgingParams(hci_scale=1.0)
    assert mttf_hci(350.0, p, i_sub=1.0) == pytest.approx(math.exp(0.25 / (8.62e-5 * 350.0)), rel=1e-15)
    assert mttf_hci(350.0, p, i_sub=2.0) == pytest.approx(496.2, rel=1e-3)


def test_em_examples():
    p = AgingParams(em_scale=1.0)
    assert mttf_em(330.0, p, current=1.0) == pytest.approx(math.exp(0.9 / (8.62e-5 * 330.0)), rel=1e-15)
    ratio = mttf_em(330.0, p, current=2.0) / mttf_em(330.0, p, current=1.0)
    assert ratio == pytest.approx(0.4665, rel=1e-4)


def test_scale_linearity():
    base = AgingParams(nbti_scale=1.0, hci_scale=1.0, em_scale=1.0)
    twice = AgingParams(nbti_scale=2.0, hci_scale=2.0, em_scale=2.0)
    for f in (mttf_nbti, mttf_hci, mttf_em):
        assert f(345.0, twice) == 2 * f(345.0, base)


def test_calibration_to_nominal_years():
    p = AgingParams()
    for f in (mttf_nbti, mttf_hci, mttf_em):
        assert f(318.0, p) == pytest.approx(7.0, rel=1e-12)


def test_all_evaluators_decrease_on_grid():
    p = AgingParams()
    T = np.linspace(300.0, 380.0, 801)
    for f in (mttf_nbti, mttf_hci, mttf_em):
        assert np.all(np.diff(f(T, p)) < 0)
    tc = [mttf_tc([ThermalCycle(10.0, t, 60.0)], TCParams()) for t in T]
    assert np.all(np.diff(tc) < 0)


def test_nbti_domain_error():
    with pytest.raises(ModelDomainError):
        mttf_nbti(350.0, AgingParams(nbti_c=2.0, nbti_scale=1.0))


def test_aging_rates_match_evaluators():
    p = AgingParams()
    T = np.array([300.0, 318.0, 351.0, 379.0])
    isub = np.array([0.6, 1.0, 1.3, 0.9])
    cur = np.array([1.0, 0.8, 1.4, 0.6])
    want = np.stack([1 / mttf_nbti(T, p), 1 / mttf_hci(T, p, isub), 1 / mttf_em(T, p, cur)])
    np.testing.assert_allclose(aging_rates(T, p, isub, cur), want, rtol=1e-13)


def test_effective_lifetime_is_harmonic_mean():
    assert effective_lifetime([2.0, 2.0]) == 2.0
    assert effective_lifetime([1.0, 3.0]) == pytest.approx(1.5)


# -- combination and reports --------------------------------------------------


def test_combined_examples():
    assert combined_mttf((4, 4, 4, 4)).value == 4
    assert combined_mttf((5.19, 5.37, 4.73, 4.93)).value == pytest.approx(5.055, abs=1e-12)
    a = combined_mttf((5.19, 5.37, 4.73, 4.93)).value
    b = combined_mttf((4.93, 4.73, 5.37, 5.19)).value
    assert a == pytest.approx(b, rel=1e-15)


def test_combined_flags_infinite_tc():
    c = combined_mttf((math.inf, 6.0, 8.0, 4.0))
    assert c.infinite and c.value == math.inf and c.finite_mean == pytest.approx(6.0)


def test_core_lifetimes_constant_reference_temperature():
    params = ReliabilityParams()
    tc, nbti, hci, em = core_lifetimes(np.full(100, 318.0), params, 1.0)
    assert tc == math.inf
    assert (nbti, hci, em) == pytest.approx((7.0, 7.0, 7.0), rel=1e-12)


def test_report_outputs(tmp_path):
    rng = np.random.default_rng(2)
    temps = 320 + np.cumsum(rng.normal(scale=2.0, size=(400, 3)), axis=0)
    rep = evaluate_trace(temps, ReliabilityParams(cap_years=20.0), 1.0)
    assert rep.n_cores == 3
    text = rep.to_csv(tmp_path / "r.csv")
    assert text.splitlines()[0].startswith("core,tc_years")
    assert len(text.splitlines()) == 4
    summary = json.loads(rep.to_json(tmp_path / "r.json"))
    assert summary["combined"] == pytest.approx(rep.system_average("combined"))
    assert all(summary[m] <= 20.0 for m in ("tc", "nbti", "hci", "em", "combined"))


def test_system_average_clips_at_cap():
    rep = MTTFReport(
        tc=np.array([math.inf, 4.0]),
        nbti=np.array([30.0, 4.0]),
        hci=np.array([4.0, 4.0]),
        em=np.array([4.0, 4.0]),
        cap_years=20.0,
    )
    assert rep.system_average("tc") == 12.0
    assert rep.combined_capped.tolist() == [12.0, 4.0]
    assert rep.infinite_flags.tolist() == [True, False]
