"""Perfect classical ordering patterns on an nx-by-ny grid, as (ny, nx) uint8 images."""
import numpy as np


def _coords(nx, ny):
    y, x = np.mgrid[0:ny, 0:nx]
    return x, y


def checkerboard(nx, ny, phase=0):
    """Phase 0 (AF1) excites sites with even col + row; phase 1 (AF2) the others."""
    x, y = _coords(nx, ny)
    return ((x + y + phase) % 2 == 0).astype(np.uint8)


def checkerboard_pair(nx, ny):
    return checkerboard(nx, ny, 0), checkerboard(nx, ny, 1)


def striated(nx, ny, shift=(0, 0)):
    """Excitations on sites with even col and even row (after shifting)."""
    x, y = _coords(nx, ny)
    return (((x + shift[0]) % 2 == 0) & ((y + shift[1]) % 2 == 0)).astype(np.uint8)


def star(nx, ny):
    """Quarter-filling star pattern: col = 0 mod 4 on even rows, col = 2 mod 4 on odd rows."""
    x, y = _coords(nx, ny)
    return (((y % 2 == 0) & (x % 4 == 0)) | ((y % 2 == 1) & (x % 4 == 2))).astype(np.uint8)
