"""Quadrature oracles shared by the module tests and the acceptance suite."""

import numpy as np

from qht.measurement import NoiseConfig, noisy_density
from qht.patterns import PatternTable, canonical_pairs
from qht.states import StateModel, quadrature_density


def reconstruction_entries(state: StateModel, table: PatternTable, max_shell: int,
                           x_window: float = 20.0, phi_nodes: int = 240) -> dict:
    """Entries recovered by the noiseless identity, computed by quadrature.

    Evaluates (1/pi) double-integral of p(x|phi) f_{j,k}(x) e^{-i(k-j)phi}
    for all j + k <= max_shell.  The x integral runs over the table's own
    grid (Riemann sum; spectrally accurate because the integrand's
    spectrum dies far below the grid's Nyquist frequency), the phi
    integral uses Gauss-Legendre.
    """
    nodes, weights = np.polynomial.legendre.leggauss(phi_nodes)
    phi = 0.5 * np.pi * (nodes + 1.0)
    wphi = 0.5 * np.pi * weights
    mask = np.abs(table.x_grid) <= x_window
    xs = table.x_grid[mask]
    dens = np.empty((phi.size, xs.size))
    for i, ph in enumerate(phi):
        dens[i] = quadrature_density(state, xs, ph)
    out = {}
    for (j, k) in canonical_pairs(max_shell + 1):
        f = table.values[table.row(j, k)][mask]
        inner = dens @ f * table.dx
        est = np.sum(wphi * np.exp(-1j * (k - j) * phi) * inner) / np.pi
        out[(j, k)] = est
        out[(k, j)] = np.conj(est)
    return out


def kernel_expectation_entries(state: StateModel, table: PatternTable, cfg: NoiseConfig,
                               max_shell: int, x_window: float = 20.0,
                               phi_nodes: int = 200) -> dict:
    """E[G_{j,k}(Y/sqrt(eta), Phi)] under the noisy record law, by quadrature.

    Substituting u = y/sqrt(eta) puts the integral on the table's grid,
    so the tabulated values are used exactly (no interpolation):
    (1/pi) int int f^eta_{j,k}(u) e^{-i(j-k)phi} sqrt(eta)
    p^eta(u sqrt(eta) | phi) du dphi.
    """
    nodes, weights = np.polynomial.legendre.leggauss(phi_nodes)
    phi = 0.5 * np.pi * (nodes + 1.0)
    wphi = 0.5 * np.pi * weights
    mask = np.abs(table.x_grid) <= x_window
    us = table.x_grid[mask]
    dens = np.empty((phi.size, us.size))
    for i, ph in enumerate(phi):
        dens[i] = np.sqrt(cfg.eta) * noisy_density(state, us * np.sqrt(cfg.eta), ph, cfg)
    out = {}
    for (j, k) in canonical_pairs(max_shell + 1):
        f = table.values[table.row(j, k)][mask]
        inner = dens @ f * table.dx
        est = np.sum(wphi * np.exp(-1j * (j - k) * phi) * inner) / np.pi
        out[(j, k)] = est
        out[(k, j)] = np.conj(est)
    return out


def shell_pairs(max_shell: int) -> list:
    """All ordered (j, k) with j + k <= max_shell."""
    return [(j, k) for j in range(max_shell + 1) for k in range(max_shell + 1 - j)]
