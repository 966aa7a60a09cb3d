"""Projective single-shot sampling and the detection-error channel."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hilbert import unpack_bits


@dataclass(eq=False)
class ShotSet:
    """Occupation images, one row of ``n_sites`` bits per shot.

    ``grid`` is (nx, ny) for square arrays; site index = row * nx + col.
    """

    shots: np.ndarray
    grid: tuple | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.shots = np.ascontiguousarray(self.shots, dtype=np.uint8)
        if self.shots.ndim != 2:
            raise ValueError("shots must be a (n_shots, n_sites) array")
        if np.any(self.shots > 1):
            raise ValueError("shots must contain only 0/1")
        if self.grid is not None:
            self.grid = (int(self.grid[0]), int(self.grid[1]))
            if self.grid[0] * self.grid[1] != self.n_sites:
                raise ValueError(f"grid {self.grid} does not match {self.n_sites} sites")

    @property
    def n_shots(self):
        return self.shots.shape[0]

    @property
    def n_sites(self):
        return self.shots.shape[1]

    def images(self):
        """(n_shots, ny, nx) view; requires a square grid."""
        if self.grid is None:
            raise ValueError("shot set has no grid dimensions")
        nx, ny = self.grid
        return self.shots.reshape(self.n_shots, ny, nx)

    @classmethod
    def from_images(cls, images, meta=None):
        images = np.asarray(images, dtype=np.uint8)
        if images.ndim == 2:
            images = images[None]
        s, ny, nx = images.shape
        return cls(images.reshape(s, ny * nx), (nx, ny), dict(meta or {}))

    def with_shots(self, shots, **extra_meta):
        return ShotSet(shots, self.grid, {**self.meta, **extra_meta})

    def to_bytes(self):
        header = json.dumps({"grid": self.grid, "meta": self.meta}, sort_keys=True).encode()
        return header + b"\n" + self.shots.tobytes()

    def write_csv(self, path, header_lines=(), sidecar_extra=None):
        """Write ``path`` (one row per shot) and a ``.json`` metadata sidecar next to it."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"site_{i}" for i in range(self.n_sites)])
            w.writerows(self.shots.tolist())
        sidecar = {"n_sites": self.n_sites, "grid": self.grid, "n_shots": self.n_shots, "meta": self.meta,
                   **(sidecar_extra or {})}
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read_csv(cls, path):
        path = Path(path)
        with path.open() as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
        shots = np.array(rows[1:], dtype=np.uint8).reshape(len(rows) - 1, len(rows[0]))
        side = json.loads(path.with_suffix(".json").read_text())
        return cls(shots, tuple(side["grid"]) if side["grid"] else None, side["meta"])


@dataclass(frozen=True)
class DetectionModel:
    p_g_loss: float = 0.01  # |g> misread as |r>
    p_r_recapture: float = 0.009  # |r> misread as |g>

    def __post_init__(self):
        for name in ("p_g_loss", "p_r_recapture"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")

    @classmethod
    def ideal(cls):
        return cls(0.0, 0.0)

    @classmethod
    def microwave_enhanced(cls):
        return cls(0.01, 0.009)

    @classmethod
    def no_microwave(cls):
        return cls(0.01, 0.15)

    def to_dict(self):
        return {"p_g_loss": self.p_g_loss, "p_r_recapture": self.p_r_recapture}


DETECTION_PRESETS = {
    "ideal": DetectionModel.ideal,
    "microwave": DetectionModel.microwave_enhanced,
    "no_microwave": DetectionModel.no_microwave,
}


def sample_configs(probabilities, n_shots, rng):
    """Indices drawn i.i.d. from ``probabilities`` (renormalised)."""
    cdf = np.cumsum(probabilities)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n_shots), side="right")
    return np.minimum(idx, cdf.size - 1)


def sample(state, n_shots, seed, grid=None, schedule_hash=None):
    """Born-rule samples of ``state`` in the occupation basis."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    norm = state.norm()
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"state is not normalised (norm {norm:.12g})")
    rng = np.random.default_rng(seed)
    idx = sample_configs(state.probabilities(), n_shots, rng)
    bits = unpack_bits(state.basis.configs[idx], state.basis.n_sites)
    meta = {"seed": seed, "schedule_hash": schedule_hash, "noise": None}
    return ShotSet(bits, grid, meta)


def sample_sharded(state, n_shots, seed, n_shards, grid=None, schedule_hash=None):
    """Split ``n_shots`` over ``n_shards`` draws seeded ``seed + shard``, concatenated in shard order."""
    if n_shards < 1:
        raise ValueError("n_shards must be >= 1")
    sizes = [n_shots // n_shards + (k < n_shots % n_shards) for k in range(n_shards)]
    parts = [sample(state, m, seed + k, grid).shots for k, m in enumerate(sizes) if m]
    meta = {"seed": seed, "n_shards": n_shards, "schedule_hash": schedule_hash, "noise": None}
    return ShotSet(np.concatenate(parts), grid, meta)


def apply_detection_noise(shots, model, seed):
    """Independent per-site flips: 0 -> 1 with p_g_loss, 1 -> 0 with p_r_recapture."""
    rng = np.random.default_rng(seed)
    s = shots.shots
    u = rng.random(s.shape)
    flip = np.where(s == 0, u < model.p_g_loss, u < model.p_r_recapture)
    noisy = s ^ flip.astype(np.uint8)
    return shots.with_shots(noisy, noise=model.to_dict(), noise_seed=seed)


def perfect_order_probability(shots, patterns):
    """Fraction of shots equal to any of ``patterns`` (images or flat bit rows)."""
    flat = np.asarray([np.asarray(p, dtype=np.uint8).ravel() for p in patterns])
    if flat.shape[1] != shots.n_sites:
        raise ValueError(f"pattern has {flat.shape[1]} sites, shots have {shots.n_sites}")
    hit = np.zeros(shots.n_shots, dtype=bool)
    for p in flat:
        hit |= np.all(shots.shots == p, axis=1)
    return float(hit.mean())
