"""Defect-free array assembly on a row/column trap grid: pre-sorting between
columns, parallel ejection, and parallel within-column sorting.

Rows are numbered from the bottom (row 0); ejection scans leave the array
below row 0.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

EJECT_ROW = -1


class PlanError(ValueError):
    """A plan violates a trap or ordering constraint on replay."""


@dataclass(eq=False)
class GridOccupancy:
    occupied: np.ndarray  # bool (rows, cols)
    target: np.ndarray  # bool (rows, cols)

    def __post_init__(self):
        self.occupied = np.asarray(self.occupied, dtype=bool).copy()
        self.target = np.asarray(self.target, dtype=bool).copy()
        if self.occupied.ndim != 2 or self.occupied.shape != self.target.shape:
            raise ValueError("occupied and target must be equal-shape 2D arrays")

    @property
    def rows(self):
        return self.occupied.shape[0]

    @property
    def cols(self):
        return self.occupied.shape[1]

    def copy(self):
        return GridOccupancy(self.occupied, self.target)

    def with_target(self, target):
        return GridOccupancy(self.occupied, target)

    def column_counts(self):
        return self.occupied.sum(axis=0)

    def target_counts(self):
        return self.target.sum(axis=0)

    def filling_fraction(self):
        n = self.target.sum()
        return float((self.occupied & self.target).sum() / n) if n else 1.0

    def targets_filled(self):
        return bool(np.all(self.occupied[self.target]))


def random_load(rows, cols, p, seed, target=None):
    if not 0.0 <= p <= 1.0:
        raise ValueError("loading probability must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    occ = rng.random((rows, cols)) < p
    return GridOccupancy(occ, np.zeros((rows, cols), bool) if target is None else target)


def centered_target(rows, cols, height, width=None):
    width = height if width is None else width
    if height > rows or width > cols:
        raise ValueError("target block larger than the grid")
    t = np.zeros((rows, cols), dtype=bool)
    r0, c0 = (rows - height) // 2, (cols - width) // 2
    t[r0:r0 + height, c0:c0 + width] = True
    return t


@dataclass(frozen=True)
class Move:
    kind: str  # horizontal | vertical | eject
    col: int
    from_row: int
    to_row: int
    to_col: int


@dataclass
class Scan:
    """Moves executed together by one sweep of the deflectors."""

    phase: str  # presort | eject | sort
    direction: str  # left | right | up | down
    moves: list
    round: int = 1

    def length_sites(self):
        if not self.moves:
            return 0
        if self.phase == "presort":
            return max(abs(m.to_col - m.col) for m in self.moves)
        if self.phase == "eject":
            return max(m.from_row for m in self.moves) - EJECT_ROW
        lo = min(min(m.from_row, m.to_row) for m in self.moves)
        hi = max(max(m.from_row, m.to_row) for m in self.moves)
        return hi - lo


@dataclass(frozen=True)
class CostModel:
    pickup_ms: float = 0.030  # 15 us ramp on plus 15 us ramp off per transfer
    speed_um_per_ms: float = 75.0
    site_pitch_um: float = 6.7
    background_lifetime_s: float | None = 10.0

    def __post_init__(self):
        if self.pickup_ms <= 0 or self.speed_um_per_ms <= 0 or self.site_pitch_um <= 0:
            raise ValueError("cost constants must be positive")
        if self.background_lifetime_s is not None and self.background_lifetime_s <= 0:
            raise ValueError("background lifetime must be positive")

    def time_ms(self, n_pickups, path_um):
        return n_pickups * self.pickup_ms + path_um / self.speed_um_per_ms

    def scan_time_ms(self, scan):
        return self.time_ms(len(scan.moves), scan.length_sites() * self.site_pitch_um)

    def survival(self, elapsed_ms):
        if self.background_lifetime_s is None:
            return 1.0
        return math.exp(-elapsed_ms * 1e-3 / self.background_lifetime_s)


@dataclass
class MovePlan:
    scans: list = field(default_factory=list)
    unresolved: list = field(default_factory=list)  # (round, col, missing, reason)

    def extend(self, scans):
        self.scans.extend(scans)

    def phase_scans(self, phase, round=None):
        return [s for s in self.scans if s.phase == phase and (round is None or s.round == round)]

    @property
    def n_moves(self):
        return sum(len(s.moves) for s in self.scans)

    def cost(self, model, round=None):
        scans = [s for s in self.scans if round is None or s.round == round]
        path = sum(s.length_sites() for s in scans) * model.site_pitch_um
        n = sum(len(s.moves) for s in scans)
        return {"n_pickups": n, "n_scans": len(scans), "path_um": path, "est_time_ms": model.time_ms(n, path)}

    def to_dict(self, model):
        return {
            "scans": [{"round": s.round, "phase": s.phase, "direction": s.direction,
                       "moves": [asdict(m) for m in s.moves]} for s in self.scans],
            "unresolved": [list(u) for u in self.unresolved],
            "cost": self.cost(model),
        }

    def to_json(self, model):
        return json.dumps(self.to_dict(model), sort_keys=True)

    def events(self, model):
        """(t_ms, kind, col, from_row, to_row, to_col) with every move stamped at its scan start."""
        t = 0.0
        rows = []
        for s in self.scans:
            for m in s.moves:
                rows.append((round(t, 9), m.kind, m.col, m.from_row, m.to_row, m.to_col))
            t += model.scan_time_ms(s)
        return rows

    def write_csv(self, path, model, header_lines=()):
        path = Path(path)
        with path.open("w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_ms", "kind", "col", "from_row", "to_row", "to_col"])
            w.writerows(self.events(model))
        return path


# ---------------------------------------------------------------------------
# pre-sorting

def _side_candidates(occ, surplus, j, side, free_rows):
    cols = range(j - 1, -1, -1) if side == "left" else range(j + 1, occ.shape[1])
    out = []
    for c in cols:
        if surplus[c] <= 0:
            continue
        for r in free_rows:
            if occ[r, c]:
                out.append((abs(c - j), r, c))
    out.sort()
    return out


def presort(grid, round_no=1):
    """Move atoms between columns until every column can fill its targets.

    A deficient column draws from the side (left or right) with the larger total
    surplus, ties going left, and falls back to the other side only if the
    preferred side has no atom in a usable row. Donors are the nearest atoms in
    rows where the deficient column is empty, smaller row first on equal
    distance, never taking a source column below its own target count. Columns
    are cycled until all are sufficient or a full pass makes no progress.
    Returns (scans, new grid, unresolved) where unresolved lists
    (col, missing, reason) for columns left short.
    """
    g = grid.copy()
    occ = g.occupied
    need = g.target_counts()
    scans = []
    while True:
        surplus = occ.sum(axis=0) - need
        if np.all(surplus >= 0):
            break
        progress = False
        for j in np.nonzero(surplus < 0)[0]:
            surplus = occ.sum(axis=0) - need
            missing = -surplus[j]
            if missing <= 0:
                continue
            pos = np.maximum(surplus, 0)
            left, right = pos[:j].sum(), pos[j + 1:].sum()
            order = ("left", "right") if left >= right else ("right", "left")
            free_rows = np.nonzero(~occ[:, j])[0]
            for side in order:
                if (pos[:j].sum() if side == "left" else pos[j + 1:].sum()) == 0:
                    continue
                cands = _side_candidates(occ, surplus, j, side, free_rows)
                if not cands:
                    continue
                used_rows, taken, moves = set(), {}, []
                for _, r, c in cands:
                    if len(moves) == missing:
                        break
                    if r in used_rows or taken.get(c, 0) >= surplus[c]:
                        continue
                    used_rows.add(r)
                    taken[c] = taken.get(c, 0) + 1
                    moves.append(Move("horizontal", int(c), int(r), int(r), int(j)))
                for m in moves:
                    occ[m.from_row, m.col] = False
                    occ[m.to_row, m.to_col] = True
                scans.append(Scan("presort", "right" if side == "left" else "left", moves, round_no))
                progress = True
                break
        if not progress:
            break
    surplus = occ.sum(axis=0) - need
    unresolved = []
    if np.any(surplus < 0):
        shortage = occ.sum() < need.sum()
        for j in np.nonzero(surplus < 0)[0]:
            unresolved.append((int(j), int(-surplus[j]), "global shortage" if shortage else "no donor in a free row"))
    return scans, g, unresolved


# ---------------------------------------------------------------------------
# ejection

def eject(grid, round_no=1):
    """Downward scans removing the lowest atom of every column that still has excess.

    The lowest atom is the only one that can leave below row 0 without passing
    another atom. Scan count equals the largest per-column excess.
    """
    g = grid.copy()
    occ = g.occupied
    excess = np.maximum(occ.sum(axis=0) - g.target_counts(), 0)
    scans = []
    while excess.any():
        moves = []
        for c in np.nonzero(excess)[0]:
            r = int(np.nonzero(occ[:, c])[0][0])
            occ[r, c] = False
            moves.append(Move("eject", int(c), r, EJECT_ROW, int(c)))
        excess = np.maximum(excess - 1, 0)
        scans.append(Scan("eject", "down", moves, round_no))
    return scans, g


# ---------------------------------------------------------------------------
# within-column sorting

def _park(positions, bound, step):
    """Final rows for atoms parked beyond a target span, nearest first.

    Each atom stays put if it already lies beyond the previous one, otherwise it
    stops one row past it.
    """
    out, f = [], bound
    for b in positions:
        f = min(b, f - 1) if step < 0 else max(b, f + 1)
        out.append(f)
    return out


def column_assignment(atoms, targets, n_rows, keep_excess=False, allow_partial=False):
    """Order-preserving final rows for the sorted ``atoms`` of one column.

    With equal counts the i-th highest atom goes to the i-th highest target.
    With excess atoms (``keep_excess``) a contiguous block of atoms fills the
    targets and the rest park just below / above the target span. With too few
    atoms (``allow_partial``) the atoms fill a contiguous block of targets.
    Among admissible block offsets the one with the least total travel wins.
    """
    atoms, targets = sorted(atoms), sorted(targets)
    n, m = len(atoms), len(targets)
    if n == m:
        return list(targets)
    if n < m:
        if not allow_partial:
            raise PlanError(f"column has {n} atoms for {m} targets")
        best = min(range(m - n + 1), key=lambda o: (sum(abs(a - t) for a, t in zip(atoms, targets[o:o + n])), o))
        return targets[best:best + n]
    if not keep_excess:
        raise PlanError(f"column has {n} atoms for {m} targets; eject first or keep excess")
    if m == 0:
        return list(atoms)
    best = None
    for o in range(n - m + 1):
        below, above = atoms[:o], atoms[o + m:]
        low = _park(below[::-1], targets[0], -1)[::-1]
        high = _park(above, targets[-1], +1)
        if (low and low[0] < 0) or (high and high[-1] >= n_rows):
            continue
        final = low + targets + high
        travel = sum(abs(a - f) for a, f in zip(atoms, final))
        if best is None or travel < best[0]:
            best = (travel, final)
    if best is None:
        raise PlanError("no room to park excess atoms around the target span")
    return best[1]


def column_sort(grid, round_no=1, keep_excess=False, allow_partial=False):
    """Alternate upward and downward parallel scans until every atom sits at its final row.

    In an upward scan each column moves its highest atom that still has to go
    up; in a downward scan, its lowest atom that has to go down. Because the
    assignment preserves order, that atom's path and destination are free, so
    it reaches its final row in one move and never moves again.
    """
    g = grid.copy()
    occ = g.occupied
    positions, finals = {}, {}
    for c in range(g.cols):
        atoms = np.nonzero(occ[:, c])[0].tolist()
        tg = np.nonzero(g.target[:, c])[0].tolist()
        if not atoms:
            continue
        positions[c] = atoms
        finals[c] = column_assignment(atoms, tg, g.rows, keep_excess, allow_partial)
    scans = []
    direction = "up"
    idle = 0
    while idle < 2:
        moves = []
        for c in sorted(positions):
            pos, fin = positions[c], finals[c]
            idx = None
            if direction == "up":
                for k in range(len(pos) - 1, -1, -1):
                    if fin[k] > pos[k]:
                        idx = k
                        break
            else:
                for k in range(len(pos)):
                    if fin[k] < pos[k]:
                        idx = k
                        break
            if idx is None:
                continue
            moves.append(Move("vertical", c, pos[idx], fin[idx], c))
            occ[pos[idx], c] = False
            occ[fin[idx], c] = True
            pos[idx] = fin[idx]
        if moves:
            scans.append(Scan("sort", direction, moves, round_no))
            idle = 0
        else:
            idle += 1
        direction = "down" if direction == "up" else "up"
    return scans, g


# ---------------------------------------------------------------------------
# replay and simulation

def validate_plan(grid, plan):
    """Replay ``plan`` on ``grid``; raise PlanError on any violation, return the final occupancy.

    Checks: sources occupied, destinations empty, horizontal moves only during
    presort and within one row, at most one move per column per vertical scan,
    and no vertical move passing another atom in its column. Atoms removed by
    loss between rounds are not part of the plan, so replay covers one round
    at a time when losses are present.
    """
    occ = grid.occupied.copy()
    for n, s in enumerate(plan.scans):
        cols = [m.col for m in s.moves]
        if s.phase != "presort" and len(set(cols)) != len(cols):
            raise PlanError(f"scan {n}: more than one move in a column")
        for m in s.moves:
            if not occ[m.from_row, m.col]:
                raise PlanError(f"scan {n}: no atom at row {m.from_row}, col {m.col}")
            if m.kind == "horizontal":
                if s.phase != "presort" or m.from_row != m.to_row:
                    raise PlanError(f"scan {n}: horizontal move outside presort or across rows")
                if occ[m.to_row, m.to_col]:
                    raise PlanError(f"scan {n}: destination ({m.to_row}, {m.to_col}) occupied")
                occ[m.from_row, m.col] = False
                occ[m.to_row, m.to_col] = True
                continue
            if m.to_col != m.col:
                raise PlanError(f"scan {n}: vertical move changes column")
            lo, hi = sorted((m.from_row, m.to_row))
            path = occ[max(lo, 0):hi + 1, m.col].copy()
            path[m.from_row - max(lo, 0)] = False
            if path.any():
                raise PlanError(f"scan {n}: atom in col {m.col} would pass or land on another atom")
            occ[m.from_row, m.col] = False
            if m.kind != "eject":
                occ[m.to_row, m.col] = True
    return GridOccupancy(occ, grid.target)


@dataclass
class RearrangeResult:
    plan: MovePlan
    final: GridOccupancy
    filling_fraction: float
    est_time_ms: float
    losses: int
    round_times_ms: list

    def summary(self):
        return {"filling_fraction": self.filling_fraction, "est_time_ms": self.est_time_ms,
                "losses": self.losses, "round_times_ms": self.round_times_ms,
                "unresolved": [list(u) for u in self.plan.unresolved], "n_moves": self.plan.n_moves,
                "n_scans": len(self.plan.scans)}


def _apply_loss(grid, model, elapsed_ms, rng):
    p = model.survival(elapsed_ms)
    if p >= 1.0:
        return grid, 0
    survive = rng.random(grid.occupied.shape) < p
    lost = int((grid.occupied & ~survive).sum())
    return GridOccupancy(grid.occupied & survive, grid.target), lost


def _one_round(grid, plan, round_no, do_eject, keep_excess):
    scans, g, unresolved = presort(grid, round_no)
    plan.extend(scans)
    plan.unresolved.extend((round_no, *u) for u in unresolved)
    if do_eject:
        scans, g = eject(g, round_no)
        plan.extend(scans)
    scans, g = column_sort(g, round_no, keep_excess=keep_excess, allow_partial=True)
    plan.extend(scans)
    return g


def plan_and_simulate(grid, cost_model=None, two_rounds=False, seed=0, targets=None):
    """Plan presort, ejection and column sorting, then apply background loss per round.

    Loss: each atom present at the end of a round survives with probability
    exp(-T_round / lifetime). In two-round mode the first round skips ejection
    and parks excess atoms beside the targets; the second round re-plans from
    the surviving atoms and ejects.
    """
    model = cost_model or CostModel()
    if targets is not None:
        grid = grid.with_target(targets)
    rng = np.random.default_rng(seed)
    plan = MovePlan()
    g = grid.copy()
    times, losses = [], 0
    rounds = ((1, False, True), (2, True, False)) if two_rounds else ((1, True, False),)
    for round_no, do_eject, keep_excess in rounds:
        g = _one_round(g, plan, round_no, do_eject, keep_excess)
        t = plan.cost(model, round_no)["est_time_ms"]
        times.append(t)
        g, lost = _apply_loss(g, model, t, rng)
        losses += lost
    return RearrangeResult(plan, g, g.filling_fraction(), float(sum(times)), losses, times)
