"""Random Landau Hamiltonian at desk scale: alloy-type disorder on the torus
and Monte Carlo Wegner-window statistics.

Couplings are uniform on [m0, M0] with one Philox counter-based stream per
trial (spawn key = trial index), so trials are reproducible and
order-independent across workers.  Window counts use dense eigensolves;
acceptance is statistical (bootstrap bands), never exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import ValidationError
from .geometry import SetMask, thickness_scan
from .lattice import MagneticOperator, TorusSetup, assemble


def fat_cantor_indices(n: int, levels: int = 3) -> np.ndarray:
    """Boolean 1-D fat-Cantor-like set on n cells (removed middles shrink
    geometrically, so the kept measure stays positive)."""
    keep = np.ones(n, dtype=bool)
    segments = [(0, n)]
    for level in range(1, levels + 1):
        frac = 4.0 ** (-level)
        nxt = []
        for a, b in segments:
            width = b - a
            cut = max(1, int(round(width * frac)))
            mid = (a + b) // 2
            lo, hi = mid - cut // 2, mid - cut // 2 + cut
            if hi - lo >= width or width < 3:
                nxt.append((a, b))
                continue
            keep[lo:hi] = False
            nxt.extend([(a, lo), (hi, b)])
        segments = nxt
    return keep


def fat_cantor_disk_profile(cells: tuple) -> np.ndarray:
    """Single-site bump: indicator of a fat-Cantor product set clipped to a
    disk inside the unit cell.  Measurable, not open, values in {0, 1}."""
    c1, c2 = cells
    keep = np.outer(fat_cantor_indices(c1), fat_cantor_indices(c2))
    x1 = (np.arange(c1) + 0.5)[:, None] / c1 - 0.5
    x2 = (np.arange(c2) + 0.5)[None, :] / c2 - 0.5
    disk = x1**2 + x2**2 <= 0.45**2
    return (keep & disk).astype(float)


@dataclass(frozen=True)
class EnsembleConfig:
    """Alloy-type ensemble on a flux-quantized torus.

    `site_profile` is the single-site bump on the cells of one unit cell of
    the integer lattice; the random potential tiles it with one coupling per
    site.  Couplings are uniform on [m0, M0].
    """

    setup: TorusSetup
    site_profile: np.ndarray
    coupling: tuple = (0.0, 1.0)
    master_seed: int = 0

    def __post_init__(self):
        prof = np.asarray(self.site_profile, dtype=float)
        if prof.min() < 0 or prof.max() > 1:
            raise ValidationError("site profile values must lie in [0, 1]")
        if prof.max() == 0:
            raise ValidationError("site profile vanishes identically")
        m0, M0 = self.coupling
        if not m0 < M0:
            raise ValidationError("need m0 < M0")
        n1, n2 = self.setup.N
        L1, L2 = self.setup.L
        if abs(L1 - round(L1)) > 1e-12 or abs(L2 - round(L2)) > 1e-12:
            raise ValidationError("box sides must be integers (site lattice Z^2)")
        sites = (int(round(L1)), int(round(L2)))
        if n1 % sites[0] or n2 % sites[1]:
            raise ValidationError("grid must divide evenly into unit cells")
        if (n1 // sites[0], n2 // sites[1]) != prof.shape:
            raise ValidationError("profile shape must match cells per unit cell")
        object.__setattr__(self, "site_profile", prof)
        # sum_j u_j must exceed a positive level on a thick set
        support = np.tile(prof >= 0.5 * prof.max(), sites)
        mask = SetMask(support, self.setup.spacing, periodic=True)
        rep = thickness_scan(mask, (min(1.0, L1), min(1.0, L2)))
        if rep.rho_lower <= 0:
            raise ValidationError("single-site support is not thick at unit scale")

    @property
    def sites(self) -> tuple:
        return (int(round(self.setup.L[0])), int(round(self.setup.L[1])))


def modulus_of_continuity(coupling: tuple, eps: float) -> float:
    """Uniform law on [m0, M0]: s(eps) = min(eps / (M0 - m0), 1)."""
    if eps <= 0:
        raise ValidationError("eps must be positive")
    m0, M0 = coupling
    return min(eps / (M0 - m0), 1.0)


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Counter-based per-trial stream; order-independent across workers."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial,))
    return np.random.Generator(np.random.Philox(seq))


def sample_couplings(config: EnsembleConfig, trial: int) -> np.ndarray:
    rng = trial_rng(config.master_seed, trial)
    m0, M0 = config.coupling
    return rng.uniform(m0, M0, size=config.sites)


def potential_from_couplings(config: EnsembleConfig, omegas: np.ndarray) -> np.ndarray:
    """V = sum_j omega_j u(x - j): per-site scaled tiles of the profile."""
    omegas = np.asarray(omegas, dtype=float)
    if omegas.shape != config.sites:
        raise ValidationError("coupling array must match the site lattice")
    return np.kron(omegas, config.site_profile)


def sample_operator(config: EnsembleConfig, trial: int) -> MagneticOperator:
    """Deterministic disordered Hamiltonian for one trial."""
    v = potential_from_couplings(config, sample_couplings(config, trial))
    return assemble(config.setup, potential=v)


def eigen_count_window(op: MagneticOperator, E: float, eps: float) -> int:
    """Exact count of eigenvalues in [E - eps, E + eps] (dense solve)."""
    if eps < 0:
        raise ValidationError("eps must be non-negative")
    evals = scipy.linalg.eigvalsh(op.matrix.toarray())
    return int(np.count_nonzero((evals >= E - eps) & (evals <= E + eps)))


def window_counts_for_trials(config: EnsembleConfig, E: float,
                             eps_list: Sequence[float], trials: int) -> np.ndarray:
    """(trials, n_eps) integer counts; one dense solve per trial."""
    eps_arr = np.asarray(eps_list, dtype=float)
    out = np.zeros((trials, eps_arr.size), dtype=int)
    for t in range(trials):
        v = potential_from_couplings(config, sample_couplings(config, t))
        op = assemble(config.setup, potential=v)
        evals = scipy.linalg.eigvalsh(op.matrix.toarray())
        for j, eps in enumerate(eps_arr):
            out[t, j] = np.count_nonzero((evals >= E - eps) & (evals <= E + eps))
    return out


@dataclass
class WegnerStats:
    energy: float
    eps: tuple
    box_sizes: tuple  # L values, ascending
    mean: np.ndarray  # (n_sizes, n_eps)
    stderr: np.ndarray
    trials: int
    coupling: tuple

    def s2eps(self) -> np.ndarray:
        return np.array([modulus_of_continuity(self.coupling, 2 * e) for e in self.eps])

    def ratios(self) -> np.ndarray:
        """mean / (s(2 eps) L^2) per size and window."""
        s = self.s2eps()[None, :]
        l2 = (np.asarray(self.box_sizes) ** 2)[:, None]
        return self.mean / (s * l2)

    def ratio_stderr(self) -> np.ndarray:
        s = self.s2eps()[None, :]
        l2 = (np.asarray(self.box_sizes) ** 2)[:, None]
        return self.stderr / (s * l2)

    def eps_slopes(self) -> np.ndarray:
        """Per size: least-squares slope of mean count vs s(2 eps)."""
        s = self.s2eps()
        return np.array(
            [float(np.dot(s, row) / np.dot(s, s)) for row in self.mean]
        )

    def l_exponents(self) -> np.ndarray:
        """Per window: fitted exponent of mean count vs L (NaN if one box)."""
        if len(self.box_sizes) < 2:
            return np.full(self.mean.shape[1], np.nan)
        ls = np.log(np.asarray(self.box_sizes, dtype=float))
        out = []
        for j in range(self.mean.shape[1]):
            m = np.log(np.maximum(self.mean[:, j], 1e-12))
            out.append(float(np.polyfit(ls, m, 1)[0]))
        return np.array(out)

    def csv_rows(self):
        rows = []
        s = self.s2eps()
        for i, L in enumerate(self.box_sizes):
            for j, e in enumerate(self.eps):
                ratio = self.mean[i, j] / (s[j] * L * L)
                rows.append(
                    f"{L!r},{self.energy!r},{e!r},{self.mean[i, j]!r},"
                    f"{self.stderr[i, j]!r},{s[j]!r},{ratio!r}"
                )
        return rows


def wegner_sweep(configs, E: float, eps_list: Sequence[float],
                 trials: int) -> WegnerStats:
    """Monte Carlo means with standard errors across one or more box sizes.

    `configs` is an EnsembleConfig or a sequence of them (same coupling law
    and profile, different boxes) for the cross-size volume fit.
    """
    if isinstance(configs, EnsembleConfig):
        configs = [configs]
    if trials < 2:
        raise ValidationError("need at least 2 trials")
    configs = sorted(configs, key=lambda c: c.setup.L[0] * c.setup.L[1])
    coupling = configs[0].coupling
    for c in configs:
        if c.coupling != coupling:
            raise ValidationError("all configs must share the coupling law")
    means, errs, sizes = [], [], []
    for cfg in configs:
        counts = window_counts_for_trials(cfg, E, eps_list, trials)
        means.append(counts.mean(axis=0))
        errs.append(counts.std(axis=0, ddof=1) / math.sqrt(trials))
        sizes.append(math.sqrt(cfg.setup.L[0] * cfg.setup.L[1]))
    return WegnerStats(
        energy=E,
        eps=tuple(float(e) for e in eps_list),
        box_sizes=tuple(sizes),
        mean=np.vstack(means),
        stderr=np.vstack(errs),
        trials=trials,
        coupling=coupling,
    )


def linear_in_eps(stats: WegnerStats, z: float = 3.0) -> bool:
    """Slope stability under window halving: per-size ratios mean/s(2 eps)
    must agree pairwise within z combined standard errors."""
    s = stats.s2eps()
    for i in range(stats.mean.shape[0]):
        r = stats.mean[i] / s
        se = stats.stderr[i] / s
        for a in range(len(r)):
            for b in range(a + 1, len(r)):
                if abs(r[a] - r[b]) > z * math.hypot(se[a], se[b]):
                    return False
    return True
