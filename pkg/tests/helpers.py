"""Shared builders and brute-force oracles for the test suite."""

import math

import numpy as np

from hybridbell.continuum import Bundle, make_grid, normalize
from hybridbell.hybrid import HybridState


def gaussian_mixture(grid, rng, terms=3, complex_coeffs=False):
    amps = np.zeros(grid.n, dtype=complex)
    for _ in range(terms):
        mu, sigma = rng.uniform(-2.5, 2.5), rng.uniform(0.5, 1.5)
        c = rng.normal() + (1j * rng.normal() if complex_coeffs else 0.0)
        amps += c * np.exp(-((grid.points - mu) ** 2) / (4 * sigma**2))
    return normalize(Bundle(grid, amps))


def random_state(rng, grid=None, complex_coeffs=False, theta=None):
    grid = grid if grid is not None else make_grid("uniform-trapezoid", 512, (-10, 10))
    if theta is None:
        theta = rng.uniform(0.02, math.pi / 2 - 0.02)
    return HybridState(theta, gaussian_mixture(grid, rng, complex_coeffs=complex_coeffs),
                       gaussian_mixture(grid, rng, complex_coeffs=complex_coeffs))


def party_b_spectrum(state):
    """Eigenvalues (descending) of the continuum party's density operator on the grid."""
    sw = np.sqrt(state.grid.weights)
    psi = state.amplitudes() * sw  # (2, n), weight-symmetrized
    rho = psi.T @ psi.conj()       # rho[k, l] = sum_p psi_p(q_k) psi_p*(q_l)
    return np.sort(np.linalg.eigvalsh(rho))[::-1]


def partial_trace_b(state):
    psi = state.amplitudes()
    return (psi * state.grid.weights) @ psi.conj().T


def projection_probability(state, u, f):
    """|<u, f|psi>|^2 evaluated as an explicit double sum over polarization and grid."""
    psi = state.amplitudes()
    amp = 0j
    for p in range(2):
        amp += np.conj(u[p]) * np.sum(state.grid.weights * np.conj(f.amplitudes) * psi[p])
    return abs(amp) ** 2
