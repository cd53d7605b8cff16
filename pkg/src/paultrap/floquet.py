"""Floquet analysis of the driven trap in a truncated oscillator basis.

The one-period propagator ``U(t0 + pi, t0)`` is assembled column by column
by propagating eigenstates of a static reference oscillator with the
split-operator solver.  Its eigenvalues ``exp(-i mu pi)`` give the
quasienergies ``mu`` (defined modulo 2).
"""
from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.linalg import schur
from scipy.optimize import linear_sum_assignment

from ._pool import ordered_map
from .errors import NumericalGuardError
from .model import DRIVE_PERIOD, potential
from .observables import Distribution
from .quantum import GUARD_MASS, SplitOperator, WaveState, check_guards

DEFAULT_DT = DRIVE_PERIOD / 1024
BLOCK_SIZE = 8
ENERGY_SAMPLES = 8
CLUSTER_GAP = 1e-6
MAX_CORE_DEFECT = 1e-2


class TruncationError(NumericalGuardError):
    """The truncated propagator is too far from unitary to diagonalize."""


# --------------------------------------------------------------------------
# reference oscillator basis


def _hermite_functions(xi, size):
    """Orthonormal Hermite functions of ``xi`` by the normalized recurrence."""
    out = np.empty((size, xi.size))
    out[0] = np.pi**-0.25 * np.exp(-xi**2 / 2)
    if size > 1:
        out[1] = np.sqrt(2.0) * xi * out[0]
    for n in range(1, size - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * xi * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


class ReferenceBasis:
    """Lowest ``size`` eigenstates of ``p^2/2 + nu^2 x^2/2`` sampled on a grid.

    The ground state has position variance ``hbar / (2 nu)`` and state ``n``
    has parity ``(-1)^n``.
    """

    def __init__(self, grid, nu, size, hbar, tol=1e-8):
        if not nu > 0:
            raise ValueError("reference frequency must be positive")
        if size < 1:
            raise ValueError("basis size must be positive")
        if size > grid.n_points // 8:
            raise ValueError(f"basis size {size} exceeds n_points/8 = {grid.n_points // 8}")
        self.grid = grid
        self.nu = float(nu)
        self.size = int(size)
        self.hbar = float(hbar)
        scale = np.sqrt(nu / hbar)
        self.functions = _hermite_functions(grid.x * scale, size) * np.sqrt(scale)
        norms = np.sum(self.functions**2, axis=1) * grid.dx
        bad = np.flatnonzero(np.abs(norms - 1) > tol)
        if bad.size:
            raise ValueError(
                f"reference state {bad[0]} is not resolved on the grid "
                f"(norm {norms[bad[0]]:.12f})")

    @property
    def parity(self):
        return np.where(np.arange(self.size) % 2 == 0, 1, -1)

    def project(self, psi):
        """Coordinates ``<chi_n | psi>`` of a grid function."""
        return self.functions @ np.asarray(psi) * self.grid.dx

    def synthesize(self, coords):
        """Grid function ``sum_n coords[n] chi_n``."""
        return np.asarray(coords) @ self.functions

    def gram(self):
        return self.functions @ self.functions.T * self.grid.dx


def reference_eigenstate(grid, nu, n, hbar):
    """The ``n``-th reference oscillator eigenstate as a :class:`WaveState`."""
    basis = ReferenceBasis(grid, nu, n + 1, hbar)
    return WaveState(grid, basis.functions[n].astype(complex), hbar)


# --------------------------------------------------------------------------
# one-period propagator


@dataclass
class MonodromyOperator:
    """Truncated one-period propagator ``U[m, n] = <chi_m | U chi_n>``.

    ``column_defect[n]`` is the absolute column sum of ``U^+ U - I``.
    ``mean_energy`` holds the period average of ``<U(t) chi_m | H(t) |
    U(t) chi_n>``; it turns into the time-averaged energy of a Floquet
    mode when sandwiched between the mode's coordinates.
    """

    matrix: np.ndarray
    mean_energy: np.ndarray
    column_defect: np.ndarray
    cfg: object
    basis: ReferenceBasis
    dt: float
    t0: float = 0.0
    duration: float = DRIVE_PERIOD

    @property
    def defect(self):
        """Largest column sum of ``|U^+ U - I|``.

        It bounds the spectral norm of ``U^+ U - I``, so every retained
        norm ``|U v|`` of a unit vector lies within ``defect`` of 1.
        """
        return float(self.column_defect.max())

    @property
    def leakage(self):
        """Probability each reference state loses from the basis in one period."""
        return 1.0 - np.sum(np.abs(self.matrix)**2, axis=0)

    @property
    def core_defect(self):
        """Largest leakage among the lowest eighth of the reference states.

        The top of any truncated basis leaks heavily; the low states must
        not, or the low-lying Floquet modes cannot be trusted.
        """
        k = max(1, self.basis.size // 8)
        return float(np.abs(self.leakage[:k]).max())


def _propagate_block(args):
    cfg, grid, hbar, cols, dt, t0, n_steps, sample_steps, guard, first = args
    prop = SplitOperator(grid, cfg, dt, t0=t0, hbar=hbar)
    psi = cols.astype(complex)
    samples = []
    j = 0
    for s in list(sample_steps) + [n_steps]:
        psi, phi = prop.advance(psi, j, s - j)
        j = s
        if s in sample_steps:
            samples.append(psi.copy())
    if guard is not None:
        for i in range(psi.shape[0]):
            state = WaveState(grid, psi[i], hbar, t0 + n_steps * dt)
            try:
                check_guards(state, guard, phi=phi[i])
            except NumericalGuardError as exc:
                raise type(exc)(f"basis column {first + i}: {exc}") from None
    return psi, samples


def build_monodromy(cfg, basis, dt=DEFAULT_DT, t0=0.0, duration=DRIVE_PERIOD,
                    energy_samples=ENERGY_SAMPLES, workers=1, guard=GUARD_MASS):
    """Propagate every basis state over ``[t0, t0 + duration]`` and project.

    Columns are processed in fixed blocks, so the matrix does not depend on
    ``workers``.  The period-averaged energy matrix uses ``energy_samples``
    equally spaced times (rectangle rule, exact for band-limited periodic
    integrands).
    """
    grid = basis.grid
    hbar = basis.hbar
    if duration < 0:
        raise ValueError("duration must be non-negative")
    n_steps = int(round(duration / dt)) if duration > 0 else 0
    h = duration / n_steps if n_steps else dt
    full_period = n_steps > 0 and abs(duration - DRIVE_PERIOD) < 1e-12
    if full_period and n_steps % energy_samples:
        raise ValueError("energy_samples must divide the number of steps")
    sample_steps = (tuple(range(0, n_steps, n_steps // energy_samples))
                    if full_period else ())
    jobs = [(cfg, grid, hbar, basis.functions[i:i + BLOCK_SIZE], h, t0, n_steps,
             sample_steps, guard, i)
            for i in range(0, basis.size, BLOCK_SIZE)]
    results = ordered_map(_propagate_block, jobs, workers)
    final = np.concatenate([r[0] for r in results])
    U = basis.functions @ final.T * grid.dx
    M = basis.size
    Hbar = np.zeros((M, M), dtype=complex)
    if sample_steps:
        p2 = 0.5 * grid.momenta(hbar)**2
        for s, step in enumerate(sample_steps):
            psi = np.concatenate([r[1][s] for r in results])
            t = t0 + step * h
            hpsi = np.fft.ifft(p2 * np.fft.fft(psi, axis=-1), axis=-1)
            hpsi += potential(cfg, grid.x, t) * psi
            Hbar += psi.conj() @ hpsi.T * grid.dx
        Hbar /= len(sample_steps)
        Hbar = 0.5 * (Hbar + Hbar.conj().T)
    defect = np.abs(U.conj().T @ U - np.eye(M)).sum(axis=0)
    return MonodromyOperator(U, Hbar, defect, cfg, basis, h, t0, duration)


# --------------------------------------------------------------------------
# spectrum


def wrap_quasienergy(mu):
    """Map quasienergies into [0, 2)."""
    mu = np.mod(mu, 2.0)
    return np.where(mu >= 2.0, mu - 2.0, mu)


def quasienergy_distance(m1, m2):
    """Distance between quasienergies on the circle of circumference 2."""
    return np.abs(np.mod(np.asarray(m1) - np.asarray(m2) + 1.0, 2.0) - 1.0)


@dataclass
class FloquetSet:
    """Floquet modes at ``t0`` ordered by time-averaged energy.

    ``vectors[:, k]`` are the basis coordinates of mode ``k``; ``parity`` is
    +1/-1 for even/odd modes and 0 when undefined; ``symmetry`` is the raw
    even-minus-odd weight; ``moduli`` are the norms ``|U v|`` retained
    by the raw truncated propagator (1 for fully resolved modes).
    """

    quasienergies: np.ndarray
    vectors: np.ndarray
    mean_energy: np.ndarray
    parity: np.ndarray
    symmetry: np.ndarray
    moduli: np.ndarray
    defect: float
    core_defect: float
    cfg: object = None
    basis: ReferenceBasis = None
    unresolved_clusters: list = field(default_factory=list)

    def __len__(self):
        return len(self.quasienergies)

    def mode(self, k):
        """Mode ``k`` on the grid at ``t0``."""
        return self.basis.synthesize(self.vectors[:, k])


def _polar_unitary(U):
    A, _, Bh = np.linalg.svd(U)
    return A @ Bh


def _eig_block(U, idx, cluster_gap):
    """Eigenpairs of the polar factor of ``U`` restricted to ``idx``.

    A complex Schur form of a unitary matrix is diagonal, so its Schur
    vectors are orthonormal eigenvectors even inside near-degenerate
    clusters.  Clusters closer than ``cluster_gap`` (in units of pi) are
    returned so that callers can report them.
    """
    W = _polar_unitary(U[np.ix_(idx, idx)])
    T, Q = schur(W, output="complex")
    lam = np.diag(T) / np.abs(np.diag(T))
    phase = np.sort(np.mod(np.angle(lam), 2 * np.pi))
    order = np.argsort(np.mod(np.angle(lam), 2 * np.pi))
    clusters = []
    start = 0
    n = len(lam)
    for i in range(1, n + 1):
        if i == n or phase[i] - phase[i - 1] >= cluster_gap * np.pi:
            if i - start > 1:
                clusters.append([int(idx[k]) for k in order[start:i]])
            start = i
    full = np.zeros((U.shape[0], n), dtype=complex)
    full[idx] = Q
    return lam, full, clusters


def floquet_spectrum(mono, max_core_defect=MAX_CORE_DEFECT, cluster_gap=CLUSTER_GAP):
    """Quasienergies and orthonormal Floquet modes of a truncated propagator.

    For parity-symmetric potentials the even and odd sectors are treated
    separately.  Each sector is replaced by its closest unitary matrix
    (polar factor) before diagonalization, which makes the modes
    orthonormal.  Doing this per sector matters: a truncated propagator is
    close to rank deficient and the polar factor of the full matrix would
    mix parities in the near-null space.  Modes are ordered by
    time-averaged energy.
    """
    if mono.core_defect > max_core_defect:
        raise TruncationError(
            f"leakage of the low reference states {mono.core_defect:.3g} exceeds {max_core_defect:g}; "
            "enlarge the basis or adjust its frequency")
    U = mono.matrix
    M = U.shape[0]
    symmetric = mono.cfg is not None and mono.cfg.is_parity_symmetric
    if symmetric:
        blocks = [np.arange(0, M, 2), np.arange(1, M, 2)]
    else:
        blocks = [np.arange(M)]
    lams, vecs, clusters = [], [], []
    for idx in blocks:
        if idx.size == 0:
            continue
        lam, V, cl = _eig_block(U, idx, cluster_gap)
        lams.append(lam)
        vecs.append(V)
        clusters.extend(cl)
    lam = np.concatenate(lams)
    V = np.concatenate(vecs, axis=1)
    mu = wrap_quasienergy(-np.angle(lam) / np.pi)
    energy = np.real(np.einsum("ik,ij,jk->k", V.conj(), mono.mean_energy, V))
    weights = np.abs(V)**2
    symmetry = weights[0::2].sum(axis=0) - weights[1::2].sum(axis=0)
    if symmetric:
        parity = np.where(symmetry > 0.5, 1, np.where(symmetry < -0.5, -1, 0))
    else:
        parity = np.zeros(M, dtype=int)
    moduli = np.linalg.norm(U @ V, axis=0)
    order = np.lexsort((mu, energy))
    return FloquetSet(mu[order], V[:, order], energy[order], parity[order],
                      symmetry[order], moduli[order], mono.defect, mono.core_defect,
                      mono.cfg, mono.basis, clusters)


def floquet_states(cfg, basis, dt=DEFAULT_DT, workers=1, **kwargs):
    """Convenience: :func:`build_monodromy` followed by :func:`floquet_spectrum`."""
    return floquet_spectrum(build_monodromy(cfg, basis, dt, workers=workers), **kwargs)


def mathieu_ladder(mu, count):
    """Quasienergies ``mu (k + 1/2) mod 2`` of the driven harmonic oscillator."""
    return wrap_quasienergy(mu * (np.arange(count) + 0.5))


# --------------------------------------------------------------------------
# expansions and mode densities


@dataclass
class ExpansionReport:
    coefficients: np.ndarray
    weights: np.ndarray
    quasienergies: np.ndarray
    completeness: float
    ranking: np.ndarray

    def top(self, n):
        """Indices and weights of the ``n`` largest contributions."""
        idx = self.ranking[:n]
        return idx, self.weights[idx]


def expansion_coefficients(state, fset, basis=None, min_completeness=0.95):
    """Coefficients ``a_k = <psi_k(t0) | state>`` of a state in Floquet modes."""
    basis = fset.basis if basis is None else basis
    if state.grid != basis.grid:
        raise ValueError("state and Floquet basis live on different grids")
    c = basis.project(state.psi)
    a = fset.vectors.conj().T @ c
    w = np.abs(a)**2
    completeness = float(w.sum())
    if completeness < min_completeness:
        warnings.warn(f"Floquet expansion covers only {completeness:.3f} of the state; "
                      "the basis is too small for it", RuntimeWarning, stacklevel=2)
    ranking = np.argsort(-w, kind="stable")
    return ExpansionReport(a, w, fset.quasienergies, completeness, ranking)


def floquet_position_distribution(fset, index, grid=None):
    """``|psi_k(x, t0)|^2`` of mode ``index`` on the basis grid."""
    if grid is not None and grid != fset.basis.grid:
        raise ValueError("modes can only be reconstructed on the basis grid")
    g = fset.basis.grid
    rho = np.abs(fset.mode(index))**2
    return Distribution(g.x, rho / (rho.sum() * g.dx))


# --------------------------------------------------------------------------
# doublets


@dataclass(frozen=True)
class Doublet:
    first: int
    second: int
    splitting: float
    center: float

    @property
    def distance_to_zero(self):
        return float(min(self.center, 2.0 - self.center))


def _doublet(fset, i, j):
    mi, mj = fset.quasienergies[i], fset.quasienergies[j]
    diff = np.mod(mj - mi + 1.0, 2.0) - 1.0
    center = float(wrap_quasienergy(mi + diff / 2))
    return Doublet(int(i), int(j), float(abs(diff)), center)


def density_similarity(fset, i, j):
    """Bhattacharyya overlap of the position densities of modes ``i`` and ``j``."""
    dx = fset.basis.grid.dx
    ri = np.abs(fset.mode(i))**2
    rj = np.abs(fset.mode(j))**2
    return float(np.sum(np.sqrt(ri * rj)) * dx / np.sqrt(ri.sum() * rj.sum() * dx * dx))


def detect_doublets(fset, tolerance, min_similarity=0.9):
    """Opposite-parity pairs closer than ``tolerance`` in quasienergy.

    A tunneling doublet is an even/odd pair built from the same localized
    density, so pairs must also have position densities with Bhattacharyya
    overlap of at least ``min_similarity``.  This discards accidental
    coincidences modulo 2 of unrelated modes.  Pairs are taken greedily by
    increasing splitting; a mode joins at most one pair.
    """
    par = fset.parity
    candidates = []
    for i in range(len(fset)):
        for j in range(i + 1, len(fset)):
            if par[i] == 0 or par[j] == 0 or par[i] == par[j]:
                continue
            d = float(quasienergy_distance(fset.quasienergies[i], fset.quasienergies[j]))
            if d < tolerance and density_similarity(fset, i, j) >= min_similarity:
                candidates.append((d, i, j))
    used = set()
    pairs = []
    for d, i, j in sorted(candidates):
        if i in used or j in used:
            continue
        used.update((i, j))
        pairs.append(_doublet(fset, i, j))
    return pairs


def lowest_doublet(fset):
    """The lowest-energy mode and its tunneling partner.

    The partner is the opposite-parity mode whose position density is most
    similar to that of the lowest mode.  Returns None without parity labels.
    """
    par = fset.parity
    if par[0] == 0:
        return None
    partners = np.flatnonzero(par == -par[0])
    if partners.size == 0:
        return None
    sim = [density_similarity(fset, 0, j) for j in partners]
    return _doublet(fset, 0, partners[int(np.argmax(sim))])


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    couplings: np.ndarray
    sets: list
    quasienergies: np.ndarray
    parity: np.ndarray
    mean_energy: np.ndarray
    moduli: np.ndarray
    overlaps: np.ndarray
    ambiguous: list

    def curve(self, k):
        return self.couplings, self.quasienergies[:, k]


def track_modes(vectors, min_overlap=0.5):
    """Connect eigenvector sets (columns) across consecutive steps.

    Returns ``(cols, overlaps, ambiguous)``: ``cols[s][k]`` is the column of
    step ``s`` that continues curve ``k`` (curves start in the order of step
    0), ``overlaps[s, k]`` the squared overlap of that match, and
    ``ambiguous`` the ``(step, curve, overlap)`` matches below
    ``min_overlap``.
    """
    M = vectors[0].shape[1]
    cols = [np.arange(M)]
    overlaps = np.ones((len(vectors), M))
    ambiguous = []
    prev = vectors[0]
    for s in range(1, len(vectors)):
        O = np.abs(prev.conj().T @ vectors[s])**2
        rows, c = linear_sum_assignment(-O)
        overlaps[s] = O[rows, c]
        for k in np.flatnonzero(overlaps[s] < min_overlap):
            ambiguous.append((s, int(k), float(overlaps[s, k])))
        cols.append(c)
        prev = vectors[s][:, c]
    return cols, overlaps, ambiguous


def _sweep_point(args):
    cfg, basis, dt, max_core_defect = args
    fset = floquet_spectrum(build_monodromy(cfg, basis, dt), max_core_defect)
    fset.basis = None
    return fset


def sweep_quasienergies(cfg, couplings, basis, dt=DEFAULT_DT, workers=1,
                        min_overlap=0.5, max_core_defect=MAX_CORE_DEFECT):
    """Quasienergy curves versus coupling, connected by eigenvector overlap.

    Sweeps typically use small bases that resolve only the lowest modes;
    per-mode resolution is kept in ``moduli``.

    At each step modes are matched to the previous step's curves by
    maximizing the total squared overlap.  Matches weaker than
    ``min_overlap`` are recorded in ``ambiguous`` as ``(step, curve,
    overlap)`` instead of being silently accepted.
    """
    couplings = np.asarray(couplings, dtype=float)
    if couplings.ndim != 1 or couplings.size == 0:
        raise ValueError("need a one-dimensional list of couplings")
    if np.any(np.diff(couplings) <= 0):
        raise ValueError("couplings must be strictly increasing")
    jobs = [(cfg.with_coupling(c), basis, dt, max_core_defect) for c in couplings]
    sets = ordered_map(_sweep_point, jobs, workers)
    for fset in sets:
        fset.basis = basis
    cols, overlaps, ambiguous = track_modes([f.vectors for f in sets], min_overlap)
    mu = np.array([f.quasienergies[c] for f, c in zip(sets, cols)])
    par = np.array([f.parity[c] for f, c in zip(sets, cols)])
    energy = np.array([f.mean_energy[c] for f, c in zip(sets, cols)])
    moduli = np.array([f.moduli[c] for f, c in zip(sets, cols)])
    if ambiguous:
        warnings.warn(f"{len(ambiguous)} curve matches fell below overlap {min_overlap}; "
                      "refine the coupling grid near those points", RuntimeWarning,
                      stacklevel=2)
    return SweepResult(couplings, sets, mu, par, energy, moduli, overlaps, ambiguous)
