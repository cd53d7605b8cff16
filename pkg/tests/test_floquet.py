import math
import warnings

import numpy as np
import pytest

from paultrap import floquet
from paultrap.model import TrapConfig, mathieu_exponent
from paultrap.quantum import Grid, gaussian_packet, moments

HB = 0.29
MU = mathieu_exponent(0.0, 0.4).mu


def reflect(f):
    return f[..., (-np.arange(f.shape[-1])) % f.shape[-1]]


@pytest.fixture(scope="module")
def ladder_set(default_grid):
    basis = floquet.ReferenceBasis(default_grid, 0.29, 40, HB)
    return floquet.floquet_states(TrapConfig(a=0, q=0.4, coupling=0.0, hbar=HB), basis)


def test_reference_ground_state_width(default_grid):
    for nu in (0.29, 1.0):
        s = floquet.reference_eigenstate(default_grid, nu, 0, HB)
        assert moments(s)[2]**2 == pytest.approx(HB / (2 * nu), rel=1e-10)
        assert s.norm() == pytest.approx(1.0, abs=1e-12)


def test_reference_basis_orthonormal_and_parity(default_grid):
    b = floquet.ReferenceBasis(default_grid, 0.29, 200, HB)
    assert np.abs(b.gram() - np.eye(200)).max() < 1e-8
    refl = reflect(b.functions)
    assert np.allclose(refl, b.parity[:, None] * b.functions, atol=1e-12)


def test_reference_basis_rejections(default_grid):
    with pytest.raises(ValueError):
        floquet.ReferenceBasis(default_grid, 0.29, 513, HB)
    with pytest.raises(ValueError):
        floquet.ReferenceBasis(default_grid, 0.0, 10, HB)
    # too coarse to resolve high states: dx = 0.625
    with pytest.raises(ValueError):
        floquet.ReferenceBasis(Grid(-40, 40, 128), 3.0, 16, HB)


def test_monodromy_static_oscillator_phases(default_grid):
    nu = 0.29
    b = floquet.ReferenceBasis(default_grid, nu, 40, HB)
    m = floquet.build_monodromy(TrapConfig(a=nu**2, q=0, coupling=0, hbar=HB), b)
    expect = np.diag(np.exp(-1j * math.pi * (np.arange(40) + 0.5) * nu))
    err = np.abs(m.matrix - expect).max(axis=0)
    # splitting error grows with the level; the lower half meets 1e-6
    assert err[:20].max() < 1e-6
    assert err.max() < 1e-5


def test_monodromy_phase_error_is_second_order(default_grid):
    b = floquet.ReferenceBasis(default_grid, 1.0, 20, HB)
    cfg = TrapConfig(a=1.0, q=0, coupling=0, hbar=HB)
    expect = np.exp(-1j * math.pi * (np.arange(20) + 0.5))
    err = [np.abs(np.diag(floquet.build_monodromy(cfg, b, math.pi / n).matrix) - expect).max()
           for n in (512, 1024)]
    assert err[0] / err[1] == pytest.approx(4.0, rel=0.1)
    assert err[1] < 1e-4


def test_monodromy_zero_duration_is_identity(default_grid, standard_cfg):
    b = floquet.ReferenceBasis(default_grid, 0.29, 30, HB)
    m = floquet.build_monodromy(standard_cfg, b, duration=0.0)
    assert np.abs(m.matrix - np.eye(30)).max() < 1e-12


def test_static_oscillator_quasienergies(default_grid):
    b = floquet.ReferenceBasis(default_grid, 1.0, 12, HB)
    fs = floquet.floquet_states(TrapConfig(a=1.0, q=0, coupling=0, hbar=HB), b)
    k = np.arange(12)
    assert np.allclose(fs.quasienergies, np.mod(k + 0.5, 2), atol=1e-4)
    assert np.allclose(fs.mean_energy, HB * (np.arange(12) + 0.5), rtol=1e-6)


def test_mathieu_ladder(ladder_set):
    fs = ladder_set
    assert np.abs(fs.quasienergies[:7] - floquet.mathieu_ladder(MU, 7)).max() < 2e-3
    assert list(fs.parity[:7]) == [1, -1, 1, -1, 1, -1, 1]
    assert np.all((fs.quasienergies >= 0) & (fs.quasienergies < 2))


def test_no_doublets_without_coupling(ladder_set):
    assert floquet.detect_doublets(ladder_set, 0.05) == []
    assert floquet.detect_doublets(ladder_set, 0.0) == []


def test_eigenvectors_orthonormal(ladder_set):
    V = ladder_set.vectors
    assert np.abs(V.conj().T @ V - np.eye(V.shape[1])).max() < 1e-10


def test_wrap_quasienergy():
    mu = np.array([-0.1, 0.0, 1.999999, 2.0, 3.7, -1e-18])
    w = floquet.wrap_quasienergy(mu)
    assert np.all((w >= 0) & (w < 2))
    assert np.allclose(floquet.wrap_quasienergy(mu + 2), w)
    assert floquet.quasienergy_distance(0.01, 1.99) == pytest.approx(0.02)


def test_truncation_rejected(default_grid, standard_cfg):
    b = floquet.ReferenceBasis(default_grid, 0.29, 16, HB)
    with pytest.raises(floquet.TruncationError):
        floquet.floquet_states(standard_cfg, b)


def test_parity_labels_only_when_symmetric(default_grid):
    b = floquet.ReferenceBasis(default_grid, 0.29, 40, HB)
    fs = floquet.floquet_states(TrapConfig(coupling=0.3, phase=0.3, hbar=HB), b)
    assert np.all(fs.parity == 0)
    assert floquet.detect_doublets(fs, 0.05) == []
    assert floquet.lowest_doublet(fs) is None


def test_expansion_of_a_mode_is_pure(ladder_set, floquet_200):
    for fs in (ladder_set, floquet_200[1]):
        j = 3
        state = type(gaussian_packet(fs.basis.grid))(fs.basis.grid, fs.mode(j), HB)
        rep = floquet.expansion_coefficients(state, fs)
        assert rep.weights[j] == pytest.approx(1.0, abs=1e-8)
        assert np.delete(rep.weights, j).max() < 1e-8
        assert rep.ranking[0] == j


def test_expansion_warns_when_incomplete(ladder_set, default_grid):
    far = gaussian_packet(default_grid, x0=25.0, hbar=HB)
    with pytest.warns(RuntimeWarning):
        rep = floquet.expansion_coefficients(far, ladder_set)
    assert rep.completeness < 0.95
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        floquet.expansion_coefficients(gaussian_packet(default_grid, hbar=HB), ladder_set)


def test_mode_distributions_even(floquet_200):
    fs = floquet_200[1]
    for k in range(6):
        d = floquet.floquet_position_distribution(fs, k)
        assert d.total() == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(d.density, reflect(d.density), atol=1e-8)


def test_standard_regime_defects(floquet_200):
    mono, fs = floquet_200
    assert mono.core_defect < 1e-3
    # the top of a truncated basis always leaks; report it rather than hide it
    assert mono.defect > mono.core_defect
    assert np.all(np.abs(1 - fs.moduli) <= mono.defect)
    V = fs.vectors
    assert np.abs(V.conj().T @ V - np.eye(V.shape[1])).max() < 1e-10
    assert fs.unresolved_clusters == []


def residuals(mono, fs, n):
    V = fs.vectors[:, :n]
    lam = np.exp(-1j * math.pi * fs.quasienergies[:n])
    return np.linalg.norm(mono.matrix @ V - V * lam, axis=0)


def test_eigen_reconstruction(floquet_200, default_grid):
    mono, fs = floquet_200
    assert residuals(mono, fs, 200).max() < 10 * mono.defect
    b = floquet.ReferenceBasis(default_grid, 0.29, 40, HB)
    m0 = floquet.build_monodromy(TrapConfig(coupling=0.0, hbar=HB), b)
    assert residuals(m0, floquet.floquet_spectrum(m0), 7).max() < 1e-6


def test_standard_ground_doublet(floquet_200):
    fs = floquet_200[1]
    pairs = floquet.detect_doublets(fs, 0.02)
    assert any({d.first, d.second} == {0, 1} for d in pairs)
    d = floquet.lowest_doublet(fs)
    assert {d.first, d.second} == {0, 1} and d.splitting < 0.02


def test_spectrum_basis_invariance(floquet_200, default_grid, standard_cfg):
    fs = floquet_200[1]
    other = floquet.floquet_states(
        standard_cfg, floquet.ReferenceBasis(default_grid, 0.35, 200, HB))
    for k in range(20):
        same = np.flatnonzero(other.parity == fs.parity[k])
        d = floquet.quasienergy_distance(fs.quasienergies[k], other.quasienergies[same])
        assert d.min() < 5e-3


def test_track_modes_flags_ambiguity():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
    perm = q[:, [2, 0, 1, 3, 4, 5]]
    dft = np.fft.fft(np.eye(3)) / math.sqrt(3)
    mixed = perm.copy()
    mixed[:, 3:] = perm[:, 3:] @ dft
    cols, ov, amb = floquet.track_modes([q, perm, mixed])
    assert list(cols[1][:3]) == [1, 2, 0]
    assert np.allclose(ov[1], 1.0)
    assert {k for s, k, _ in amb if s == 2} == {3, 4, 5}


def test_sweep_starts_on_ladder(default_grid):
    b = floquet.ReferenceBasis(default_grid, MU, 40, HB)
    res = floquet.sweep_quasienergies(TrapConfig(coupling=0.0, hbar=HB), [0.0, 0.02], b,
                                      workers=2)
    assert np.abs(res.quasienergies[0, :7] - floquet.mathieu_ladder(MU, 7)).max() < 2e-3
    assert np.all(res.overlaps[1, :7] > 0.9)
    with pytest.raises(ValueError):
        floquet.sweep_quasienergies(TrapConfig(hbar=HB), [0.1, 0.0], b)
