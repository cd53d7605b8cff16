import math

import numpy as np
import pytest

from paultrap import quantum
from paultrap.errors import AliasingError, BoundaryMassError
from paultrap.model import TrapConfig
from paultrap.observables import Distribution
from paultrap.quantum import Grid, SplitOperator, gaussian_packet, moments

HB = 0.29
FREE = TrapConfig(a=0, q=0, coupling=0, hbar=HB)


def reflect(psi):
    return psi[(-np.arange(len(psi))) % len(psi)]


def test_grid_properties(default_grid):
    g = default_grid
    assert g.dx == pytest.approx(160 / 4096)
    assert g.max_momentum(HB) == pytest.approx(HB * math.pi * 4096 / 160)
    p = g.momenta(HB)
    assert p[1] == pytest.approx(HB * 2 * math.pi / 160)
    assert np.abs(p).max() == pytest.approx(g.max_momentum(HB))
    with pytest.raises(ValueError):
        Grid(-1, 1, 1000)
    with pytest.raises(ValueError):
        Grid(1, -1, 1024)


def test_gaussian_packet_moments(default_grid):
    s = gaussian_packet(default_grid, sigma_x2=0.29, hbar=HB)
    mx, mp, dx, dp = moments(s)
    assert s.norm() == pytest.approx(1.0, abs=1e-12)
    assert dx == pytest.approx(math.sqrt(0.29), abs=1e-10)
    assert dp == pytest.approx(HB / (2 * math.sqrt(0.29)), abs=1e-10)
    assert abs(mx) < 1e-12 and abs(mp) < 1e-12


def test_moving_packets(default_grid):
    s = gaussian_packet(default_grid, p0=2.0, hbar=HB)
    assert moments(s)[1] == pytest.approx(2.0, abs=1e-6)
    d = quantum.momentum_distribution(gaussian_packet(default_grid, p0=1.0, hbar=HB))
    assert abs(d.centers[np.argmax(d.density)] - 1.0) <= d.spacing


def test_packet_rejections(default_grid):
    with pytest.raises(ValueError):
        gaussian_packet(default_grid, sigma_x2=0.0)
    with pytest.raises(ValueError):
        gaussian_packet(default_grid, sigma_x2=25.0**2)


def test_distributions_normalized_and_even(default_grid):
    s = gaussian_packet(default_grid, hbar=HB)
    px = quantum.position_distribution(s)
    pp = quantum.momentum_distribution(s)
    assert px.total() == pytest.approx(1.0, abs=1e-10)
    assert pp.total() == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(px.density, reflect(px.density), atol=1e-12)
    # sorted momentum axis runs from -p_max to p_max - dp, so mirror about index N/2
    assert np.allclose(pp.density[1:], pp.density[1:][::-1], atol=1e-12)
    assert pp.std() == pytest.approx(HB / (2 * math.sqrt(HB)), rel=1e-8)


def test_free_spreading_exact(default_grid):
    s = gaussian_packet(default_grid, sigma_x2=0.29, hbar=HB)
    dp = HB / (2 * math.sqrt(0.29))
    for dt in (0.5, 1.25):
        st = s
        for _ in range(4):
            st = quantum.split_step(st, FREE, dt)
        _, _, dx, dpt = moments(st)
        assert dx**2 == pytest.approx(0.29 + (dp * st.t)**2, abs=1e-10)
        assert dpt == pytest.approx(dp, abs=1e-10)


def test_oscillator_ground_state_stationary(default_grid):
    osc = TrapConfig(a=1.0, q=0.0, coupling=0.0, hbar=HB)
    s = gaussian_packet(default_grid, sigma_x2=HB / 2, hbar=HB)
    dev = {}
    for n in (256, 1024):
        run = quantum.evolve(s, osc, 2 * math.pi, dt=math.pi / n)
        dev[n] = max(np.abs(run.series.dx - math.sqrt(HB / 2)).max(),
                     np.abs(run.series.dp - math.sqrt(HB / 2)).max())
    # residual breathing is the O(dt^2) splitting error
    assert dev[256] / dev[1024] == pytest.approx(16.0, rel=0.1)
    assert dev[1024] < 1e-6


def test_split_step_matches_operator_and_norm(default_grid, standard_cfg):
    s = gaussian_packet(default_grid, x0=0.3, p0=0.5, hbar=HB)
    dt = math.pi / 512
    st = s
    for _ in range(5):
        new = quantum.split_step(st, standard_cfg, dt)
        assert abs(new.norm() - st.norm()) < 1e-12
        st = new
    psi = SplitOperator(default_grid, standard_cfg, dt).advance(s.psi, 0, 5)[0]
    assert np.abs(psi - st.psi).max() < 1e-12
    assert st.t == pytest.approx(5 * dt)
    with pytest.raises(ValueError):
        quantum.split_step(s, standard_cfg, 0.0)


def test_norm_drift_long_run(default_grid, standard_cfg):
    s = gaussian_packet(default_grid, hbar=HB)
    prop = SplitOperator(default_grid, standard_cfg, math.pi / 512)
    psi = prop.advance(s.psi, 0, 100_000)[0]
    assert abs(np.sum(np.abs(psi)**2) * default_grid.dx - 1) < 1e-8


def test_strang_second_order(default_grid, standard_cfg):
    s = gaussian_packet(default_grid, hbar=HB)
    out = {n: SplitOperator(default_grid, standard_cfg, math.pi / n).advance(s.psi, 0, n)[0]
           for n in (64, 128, 256)}
    e1 = np.linalg.norm(out[64] - out[128])
    e2 = np.linalg.norm(out[128] - out[256])
    assert math.log2(e1 / e2) == pytest.approx(2.0, abs=0.2)


def test_evolve_parity_and_uncertainty(default_grid, standard_cfg):
    s = gaussian_packet(default_grid, hbar=HB)
    run = quantum.evolve(s, standard_cfg, 20 * math.pi)
    ser = run.series
    assert np.abs(ser.mean_x).max() < 1e-8 and np.abs(ser.mean_p).max() < 1e-8
    assert np.all(ser.dx * ser.dp >= HB / 2 * (1 - 1e-6))
    odd = 0.5 * (run.final.psi - reflect(run.final.psi))
    assert math.sqrt(np.sum(np.abs(odd)**2) * default_grid.dx) < 1e-8
    assert len(ser) == 20 * 8
    assert ser.times[0] == pytest.approx(math.pi / 8)
    assert run.guards.checks == len(ser)


def test_evolve_snapshots_in_window(default_grid, standard_cfg):
    s = gaussian_packet(default_grid, hbar=HB)
    run = quantum.evolve(s, standard_cfg, 4 * math.pi, window=(math.pi, 3 * math.pi),
                         snapshots_per_period=4)
    assert len(run.snapshot_times) == 9
    avg = quantum.window_average(run.position_snapshots)
    assert avg.total() == pytest.approx(1.0)


def test_window_average_rules():
    x = np.linspace(-1, 1, 21)
    a = Distribution(x, np.exp(-x**2))
    same = quantum.window_average([a, a, a])
    assert np.allclose(same.density, a.normalized().density)
    d1 = np.zeros(21)
    d1[3] = 10.0
    d2 = np.zeros(21)
    d2[15] = 10.0
    half = quantum.window_average([Distribution(x, d1), Distribution(x, d2)])
    assert half.density[3] * half.spacing == pytest.approx(0.5)
    assert half.density[15] * half.spacing == pytest.approx(0.5)
    with pytest.raises(ValueError):
        quantum.window_average([])


def test_boundary_guard():
    g = Grid(-10, 10, 256)
    s = gaussian_packet(g, x0=8.5, hbar=HB)
    with pytest.raises(BoundaryMassError) as exc:
        quantum.split_step(s, FREE, 0.01)
    assert exc.value.time == pytest.approx(0.01)


def test_aliasing_guard():
    g = Grid(-10, 10, 256)
    s = gaussian_packet(g, p0=0.95 * g.max_momentum(HB), hbar=HB)
    with pytest.raises(AliasingError):
        quantum.split_step(s, FREE, 0.01)


def test_guards_on_standard_run_short(default_grid, standard_cfg):
    run = quantum.evolve(gaussian_packet(default_grid, hbar=HB), standard_cfg, 10 * math.pi)
    assert run.guards.max_boundary_mass < 1e-6
    assert run.guards.max_momentum_tail < 1e-6
