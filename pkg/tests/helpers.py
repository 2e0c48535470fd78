import numpy as np


def channel_field(m, contrast=100.0, row=None):
    """Ones with one horizontal row of cells raised to `contrast`."""
    values = np.ones((m.ny_fine, m.nx_fine))
    values[m.ny_fine // 2 - 1 if row is None else row, :] = contrast
    return values


def random_spd(rng, n, shift=1.0):
    X = rng.standard_normal((n, n))
    return X @ X.T + shift * np.eye(n)
