"""Tests for the evolving-amplitude comparison model and its invariants."""

import csv
import json

import numpy as np
import pytest

from peakonlab.ch_reference import (
    CHState,
    ch_hamiltonian,
    ch_rhs,
    integrate_ch,
)
from peakonlab.integrators import NumericalAbort


def test_single_soliton_rhs():
    st = CHState(np.array([3.0]), np.array([1.7]))
    dx, dp = ch_rhs(st)
    assert dx[0] == pytest.approx(1.7, rel=1e-15)
    assert dp[0] == 0.0


def test_symmetric_pair_amplitude_exchange_rate():
    a = 0.7
    st = CHState(np.array([-a, a]), np.array([1.0, 1.0]))
    dx, dp = ch_rhs(st)
    assert dp[0] == pytest.approx(-np.exp(-2 * a), rel=1e-14)
    assert dp[1] == pytest.approx(np.exp(-2 * a), rel=1e-14)
    # equal amplitudes, equal pull
    assert dx[0] == pytest.approx(dx[1], rel=1e-14)


def test_total_momentum_rate_vanishes():
    rng = np.random.default_rng(11)
    for _ in range(10):
        n = rng.integers(1, 7)
        st = CHState(np.sort(rng.normal(size=n) * 3), rng.uniform(-2, 2, n))
        _, dp = ch_rhs(st)
        assert abs(dp.sum()) < 1e-13


def test_hamiltonian_values():
    assert ch_hamiltonian(CHState(np.array([0.0]), np.array([1.0]))) == 0.5
    st = CHState(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    assert ch_hamiltonian(st) == pytest.approx(2.0, rel=1e-15)
    pair = CHState(np.array([0.0, 5.0]), np.array([2.0, 1.0]))
    assert ch_hamiltonian(pair) == pytest.approx(
        0.5 * (5.0 + 4.0 * np.exp(-5.0)), rel=1e-15
    )


def test_single_soliton_travels_rigidly():
    st = CHState(np.array([-2.0]), np.array([1.3]))
    traj = integrate_ch(st, dt=1e-3, t_end=10.0, store_every=1000)
    assert traj.positions[-1, 0] == pytest.approx(-2.0 + 13.0, abs=1e-11)
    assert traj.amplitudes[-1, 0] == pytest.approx(1.3, abs=1e-14)


def test_overtaking_pair_exchanges_speeds_without_crossing():
    # sum and sum-of-squares of the amplitudes are both conserved, and the
    # squared sum at infinite separation equals its initial value, so the
    # asymptotic amplitudes solve z^2 - 3 z + (2 - 2 e^{-5}) = 0
    disc = np.sqrt(1.0 + 8.0 * np.exp(-5.0))
    roots = np.array([(3.0 - disc) / 2.0, (3.0 + disc) / 2.0])
    np.testing.assert_allclose(
        roots, [0.9867009701955685, 2.0132990298044318], rtol=1e-15
    )

    st = CHState(np.array([0.0, 5.0]), np.array([2.0, 1.0]))
    traj = integrate_ch(st, dt=1e-3, t_end=25.0, store_every=50)
    report = traj.conservation_report()
    assert report["H0_drift"] <= 1e-8
    assert report["momentum_drift"] <= 1e-12
    # never crosses, amplitudes stay positive the whole way
    assert np.all(np.diff(traj.positions, axis=1) > 0)
    assert np.all(traj.amplitudes > 0)
    # the trailing particle hands its speed over instead of passing
    fin = traj.final_state()
    np.testing.assert_allclose(fin.amplitudes, roots, rtol=0, atol=1e-6)
    dx, _ = ch_rhs(fin)
    np.testing.assert_allclose(dx, roots, rtol=0, atol=1e-6)
    np.testing.assert_allclose(dx, [1.0, 2.0], rtol=0, atol=0.02)


def test_conservation_over_ten_units_is_tight():
    st = CHState(np.array([0.0, 5.0]), np.array([2.0, 1.0]))
    traj = integrate_ch(st, dt=1e-3, t_end=10.0, store_every=10)
    report = traj.conservation_report()
    assert report["H0_drift"] <= 1e-8
    assert report["momentum_drift"] <= 1e-12


def test_opposite_amplitudes_abort():
    # a colliding peak/antipeak pair blows up in finite time; the
    # conservation or ordering watchdog must refuse to integrate through it
    st = CHState(np.array([-1.0, 1.0]), np.array([1.0, -1.0]))
    with pytest.raises(NumericalAbort):
        integrate_ch(st, dt=1e-3, t_end=5.0)


def test_csv_and_report_files(tmp_path):
    st = CHState(np.array([0.0, 2.0]), np.array([1.5, 0.5]))
    traj = integrate_ch(st, dt=1e-3, t_end=0.5, store_every=100)
    csv_path = tmp_path / "run.csv"
    traj.to_csv(csv_path)
    with open(csv_path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x1", "x2", "p1", "p2"]
    assert len(rows) - 1 == len(traj.times)
    got = np.array([[float(v) for v in r] for r in rows[1:]])
    np.testing.assert_array_equal(got[:, 0], traj.times)
    np.testing.assert_array_equal(got[:, 1:3], traj.positions)
    np.testing.assert_array_equal(got[:, 3:5], traj.amplitudes)

    json_path = tmp_path / "report.json"
    traj.report_to_json(json_path)
    with open(json_path) as fh:
        report = json.load(fh)
    assert set(report) == {"H0_drift", "momentum_drift"}
    assert report["H0_drift"] <= 1e-8


def test_state_validation():
    with pytest.raises(ValueError):
        CHState(np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        CHState(np.array([np.inf]), np.array([1.0]))
    with pytest.raises(ValueError):
        integrate_ch(CHState(np.array([0.0]), np.array([1.0])), dt=-1.0)
