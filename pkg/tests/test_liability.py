import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import spreadsheet_payments
from decom_alm.errors import ScheduleError
from decom_alm.liability import (
    CashflowSchedule,
    EconomicParams,
    build_schedule,
    funding_gap_report,
    liability_value,
    payment_value,
    read_schedule_csv,
    required_endowment,
    write_schedule_csv,
)


def oracle_L(t, econ, rows):
    total = 0.0
    for tj, amount in rows:
        if tj > t:
            total += amount * math.exp(-econ.a_L * (tj - t))
    return math.exp((econ.gamma - econ.r) * t) * total


class TestBuildSchedule:
    def test_default_buckets(self, schedule):
        assert len(schedule) == 420
        assert schedule.total == pytest.approx(19350.0, rel=1e-14)

    def test_counts_within_horizon(self, schedule):
        assert np.sum((schedule.times > 0) & (schedule.times <= 20)) == 240
        assert len(schedule.constraint_dates) == 40
        assert schedule.constraint_dates[0] == 0.5
        assert schedule.constraint_dates[-1] == 20.0

    def test_payments_beyond_horizon_are_kept(self, schedule):
        assert schedule.times.max() == pytest.approx(35.0)

    def test_matches_spreadsheet(self, schedule):
        rows = spreadsheet_payments()
        np.testing.assert_allclose(schedule.times, [r[0] for r in rows], rtol=0, atol=1e-12)
        np.testing.assert_allclose(schedule.amounts, [r[1] for r in rows], rtol=1e-15)

    def test_empty(self):
        s = build_schedule([])
        assert len(s) == 0
        assert len(s.constraint_dates) == 40

    def test_single_bucket(self):
        s = build_schedule([(2000, 600.0)])
        assert len(s) == 60
        np.testing.assert_array_equal(s.amounts, np.full(60, 10.0))
        np.testing.assert_allclose(s.times, np.arange(1, 61) / 12)

    def test_overlap_rejected(self):
        with pytest.raises(ScheduleError):
            build_schedule([(2015, 1.0), (2017, 1.0)])

    def test_negative_total_rejected(self):
        with pytest.raises(ScheduleError):
            build_schedule([(2015, -1.0)])

    def test_unknown_spreading(self):
        with pytest.raises(ScheduleError):
            build_schedule(spreading="lump")

    def test_gap_between_buckets_allowed(self):
        s = build_schedule([(2015, 60.0), (2025, 60.0)])
        assert s.times[60] == pytest.approx(10 + 1 / 12)

    def test_unsorted_times_rejected(self):
        with pytest.raises(ScheduleError):
            CashflowSchedule(np.array([1.0, 0.5]), np.array([1.0, 1.0]), np.array([1.0]))


class TestLiabilityValue:
    def test_empty_schedule_is_zero(self, econ):
        s = build_schedule([])
        assert liability_value(s, 0.0, econ) == 0.0
        assert liability_value(s, 7.3, econ) == 0.0

    def test_single_payment_no_discounting(self):
        p = EconomicParams(r=0.03, gamma=0.03, a_L=1e-300, T=5)
        s = CashflowSchedule(np.array([2.0]), np.array([100.0]), np.array([1.0]))
        assert liability_value(s, 1.0, p) == pytest.approx(100.0, rel=1e-15)

    def test_full_schedule_t0(self, schedule, econ):
        rows = spreadsheet_payments()
        assert liability_value(schedule, 0.0, econ) == pytest.approx(oracle_L(0.0, econ, rows), rel=1e-12)

    def test_against_oracle_at_random_dates(self, schedule, rng):
        econ = EconomicParams(r=0.015, gamma=0.025, a_L=0.03, T=20)
        rows = spreadsheet_payments()
        ts = rng.uniform(0, 36, 25)
        got = liability_value(schedule, ts, econ)
        want = [oracle_L(t, econ, rows) for t in ts]
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_payment_at_t_is_excluded(self):
        p = EconomicParams()
        s = CashflowSchedule(np.array([1.0, 2.0]), np.array([10.0, 20.0]), np.array([1.0]))
        assert liability_value(s, 1.0, p) == pytest.approx(20.0 * math.exp(-p.a_L))

    def test_past_last_payment(self, schedule, econ):
        assert liability_value(schedule, 40.0, econ) == 0.0

    def test_accrual_rate_between_payments(self, schedule, econ):
        t1, t2 = 3.0 + 0.01, 3.0 + 0.07
        ratio = liability_value(schedule, t2, econ) / liability_value(schedule, t1, econ)
        assert ratio == pytest.approx(math.exp(econ.a_L * (t2 - t1)), rel=1e-12)

    def test_jump_at_payment(self, schedule):
        econ = EconomicParams(r=0.02, gamma=0.03, a_L=0.026)
        tj, amount = schedule.times[100], schedule.amounts[100]
        eps = 1e-7
        left = liability_value(schedule, tj - eps, econ) * math.exp(econ.a_L * eps) * math.exp((econ.gamma - econ.r) * eps)
        right = liability_value(schedule, tj, econ)
        assert left - right == pytest.approx(amount * math.exp((econ.gamma - econ.r) * tj), rel=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0, 30), st.floats(0.1, 10))
    def test_linear_in_amounts(self, t, k):
        s = build_schedule()
        econ = EconomicParams()
        assert liability_value(s.scaled(k), t, econ) == pytest.approx(k * liability_value(s, t, econ), rel=1e-12)


class TestEndowment:
    def test_shortfall(self):
        assert required_endowment(90.0, 100.0, True) == 10.0

    def test_surplus(self):
        assert required_endowment(120.0, 100.0, True) == 0.0

    def test_inactive_date(self):
        assert required_endowment(90.0, 100.0, False) == 0.0

    @given(st.floats(-1e6, 1e6), st.floats(0, 1e6), st.booleans())
    def test_nonnegative_and_restores(self, A, L, flag):
        inj = required_endowment(A, L, flag)
        assert inj >= 0
        if A >= L:
            assert inj == 0
        if flag:
            assert A + inj >= L - 1e-9 * max(1.0, abs(A), L)


def test_csv_roundtrip(tmp_path, schedule, econ):
    path = tmp_path / "payments.csv"
    write_schedule_csv(schedule, path)
    back = read_schedule_csv(path, horizon=econ)
    np.testing.assert_array_equal(back.times, schedule.times)
    np.testing.assert_array_equal(back.amounts, schedule.amounts)
    np.testing.assert_array_equal(back.constraint_dates, schedule.constraint_dates)


def test_constraint_csv(tmp_path):
    pay = tmp_path / "p.csv"
    pay.write_text("date_years,amount_meur\n1.0,5\n2.5,7\n")
    con = tmp_path / "c.csv"
    con.write_text("date_years\n1\n2\n")
    s = read_schedule_csv(pay, con)
    np.testing.assert_array_equal(s.constraint_dates, [1.0, 2.0])
    assert s.total == 12.0


def test_payment_value_window(schedule, econ):
    assert payment_value(schedule, 0.0, 0.5, econ) == pytest.approx(6 * 200 / 60)
    assert payment_value(schedule, 0.5, 0.5 + 1 / 12, econ) == pytest.approx(200 / 60)


def test_funding_gap_report(schedule, econ):
    rep = funding_gap_report(schedule, econ)
    assert rep["L0"] < 19350
    assert rep["ratio"] > 1
