import numpy as np

from ..measure import ShotSet


def grid_images(shots):
    """(n_shots, ny, nx) array from a ShotSet or an image stack."""
    if isinstance(shots, ShotSet):
        return shots.images()
    images = np.asarray(shots)
    if images.ndim == 2:
        images = images[None]
    if images.ndim != 3:
        raise ValueError("expected a ShotSet or an (n_shots, ny, nx) image stack")
    return images


def normalized_weights(weights, n):
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("weights must be non-negative, one per shot, with positive sum")
    return w / w.sum()
