"""Shared generators for randomized tests."""

import numpy as np

from qlin import Channel, build_system, sigma


def random_system(rng, n, m, force=False):
    """Random physically valid system: symmetric G, dense C."""
    G = rng.normal(size=(2 * n, 2 * n))
    G = (G + G.T) / 2.0
    C = rng.normal(size=(2 * m, 2 * n))
    f = rng.normal(size=2 * n) if force else None
    return build_system(G, C, channels=[Channel(f"W{j + 1}") for j in range(m)], force=f)


def random_orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    return Q * np.sign(np.diagonal(R))


def random_symplectic(rng, n_modes, scale=0.3):
    """exp(Sigma S) with S symmetric is symplectic (a Hamiltonian flow)."""
    from scipy.linalg import expm

    S = rng.normal(size=(2 * n_modes, 2 * n_modes)) * scale
    S = (S + S.T) / 2.0
    return expm(sigma(n_modes) @ S)


def planted_dfs_system(rng, n_active, m):
    """Direct sum of a random open block and a closed (decoupled) mode."""
    inner = random_system(rng, n_active, m)
    n = n_active + 1
    G = np.zeros((2 * n, 2 * n))
    G[: 2 * n_active, : 2 * n_active] = inner.G
    G[2 * n_active:, 2 * n_active:] = rng.normal() * np.eye(2)
    C = np.zeros((2 * m, 2 * n))
    C[:, : 2 * n_active] = inner.C
    return build_system(G, C, channels=[Channel(f"W{j + 1}") for j in range(m)])


def planted_qnd_system(rng, n_active, m):
    """Direct sum of a random open block and a probed-ensemble mode whose
    momentum is uncontrollable but readable."""
    inner = random_system(rng, n_active, max(m - 1, 0)) if m > 1 else None
    n = n_active + 1 if inner is not None else 1
    mu = 1.0 + rng.random()
    if inner is None:
        C = np.array([[0.0, np.sqrt(mu)], [0.0, 0.0]])
        return build_system(np.zeros((2, 2)), C, channels=[Channel("W1")])
    G = np.zeros((2 * n, 2 * n))
    G[: 2 * n_active, : 2 * n_active] = inner.G
    C = np.zeros((2 * m, 2 * n))
    C[: 2 * (m - 1), : 2 * n_active] = inner.C
    C[2 * (m - 1), 2 * n_active + 1] = np.sqrt(mu)
    return build_system(G, C, channels=[Channel(f"W{j + 1}") for j in range(m)])
