"""Dominance, non-dominated filtering, and front-quality metrics.

All objectives are maximized. The three metrics:

Hypervolume (HV)
    Lebesgue measure of the union of boxes [ref, p] over front points p,
    computed exactly by a sorted sweep for d=2 and by sweeping the third
    coordinate over 2-D slabs for d=3.

Expected utility (EU)
    Mean over uniform-simplex preference samples w of max_p w . p.

Sparsity (SP)
    S(P) = 1/(|P|-1) * sum_i sum_k (G_i(k) - G_i(k+1))^2 where G_i is the
    i-th objective's values sorted descending; lower means denser.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


@dataclass
class FrontPoint:
    returns: np.ndarray
    policy_id: int | str
    stage: str = ""

    def __post_init__(self) -> None:
        self.returns = np.asarray(self.returns, dtype=np.float64)
        if not np.all(np.isfinite(self.returns)):
            raise ValueError("front point has non-finite returns")


@dataclass
class ParetoArchive:
    """A mutually non-dominated set of front points."""

    points: list[FrontPoint]
    d: int

    def matrix(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, self.d))
        return np.stack([p.returns for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """True iff a is componentwise >= b and strictly greater somewhere."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a >= b) and np.any(a > b))


def non_dominated_filter(points: Sequence[FrontPoint]) -> ParetoArchive:
    """Keep exactly the points dominated by no other input point.

    Duplicate return vectors collapse to the representative with the
    lowest policy_id. Points are pre-sorted lexicographically descending
    so each survivor only needs checking against previous survivors.
    """
    if not points:
        raise ValueError("cannot filter an empty point set")
    d = points[0].returns.shape[0]
    for p in points:
        if p.returns.shape[0] != d:
            raise ValueError("points mix objective counts")

    by_returns: dict[tuple[float, ...], FrontPoint] = {}
    for p in points:
        key = tuple(p.returns.tolist())
        kept = by_returns.get(key)
        if kept is None or p.policy_id < kept.policy_id:
            by_returns[key] = p
    unique = list(by_returns.values())

    order = sorted(range(len(unique)), key=lambda i: tuple(-unique[i].returns))
    kept_points: list[FrontPoint] = []
    for i in order:
        cand = unique[i]
        if not any(dominates(k.returns, cand.returns) for k in kept_points):
            kept_points.append(cand)
    return ParetoArchive(points=kept_points, d=d)


# ---------------------------------------------------------------------------
# Hypervolume


def _check_ref(front: np.ndarray, ref: np.ndarray) -> None:
    bad = np.any(front < ref, axis=1)
    if np.any(bad):
        raise ValueError(
            f"reference point {ref.tolist()} is not weakly dominated by all "
            f"front points (e.g. {front[np.argmax(bad)].tolist()})"
        )


def _hv2d(front: np.ndarray, ref: np.ndarray) -> float:
    order = np.argsort(-front[:, 0])
    hv = 0.0
    best_y = ref[1]
    for x, y in front[order]:
        if y > best_y:
            hv += (x - ref[0]) * (y - best_y)
            best_y = y
    return hv


def _hv3d(front: np.ndarray, ref: np.ndarray) -> float:
    # Sweep the third objective downwards; between consecutive levels the
    # dominated region is a 2-D hypervolume times the slab height.
    order = np.argsort(-front[:, 2])
    pts = front[order]
    volume = 0.0
    layer: list[np.ndarray] = []
    i = 0
    prev_z = None
    while i < len(pts):
        z = pts[i, 2]
        if layer and prev_z is not None and prev_z > z:
            volume += _hv2d(np.stack(layer), ref[:2]) * (prev_z - z)
        while i < len(pts) and pts[i, 2] == z:
            layer.append(pts[i, :2])
            i += 1
        prev_z = z
    if layer and prev_z is not None:
        volume += _hv2d(np.stack(layer), ref[:2]) * (prev_z - ref[2])
    return volume


def hypervolume(archive: ParetoArchive | np.ndarray, ref_point: np.ndarray) -> float:
    """Exact hypervolume of a front against a reference point (d = 2 or 3)."""
    front = archive.matrix() if isinstance(archive, ParetoArchive) else np.asarray(archive, dtype=np.float64)
    ref = np.asarray(ref_point, dtype=np.float64)
    if front.ndim != 2 or front.shape[1] != ref.shape[0]:
        raise ValueError("front and reference point disagree on objective count")
    if front.shape[0] == 0:
        return 0.0
    _check_ref(front, ref)
    d = ref.shape[0]
    if d == 1:
        return float(front[:, 0].max() - ref[0])
    if d == 2:
        return float(_hv2d(front, ref))
    if d == 3:
        return float(_hv3d(front, ref))
    raise ValueError(f"exact hypervolume implemented for d <= 3, got d={d}")


# ---------------------------------------------------------------------------
# Expected utility


def sample_simplex(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform (flat Dirichlet) samples on the (d-1)-simplex via exponentials."""
    e = rng.standard_exponential((n, d))
    return e / e.sum(axis=1, keepdims=True)


def expected_utility(
    archive: ParetoArchive | np.ndarray,
    n_weights: int = 10_000,
    seed: int = 0,
    chunk: int = 65_536,
) -> float:
    """Mean best scalarized return over uniform random preferences."""
    front = archive.matrix() if isinstance(archive, ParetoArchive) else np.asarray(archive, dtype=np.float64)
    if front.shape[0] == 0:
        raise ValueError("expected utility of an empty archive is undefined")
    if n_weights < 1:
        raise ValueError("n_weights must be >= 1")
    d = front.shape[1]
    rng = np.random.default_rng(seed)
    total = 0.0
    remaining = n_weights
    while remaining > 0:
        m = min(chunk, remaining)
        weights = sample_simplex(m, d, rng)
        total += float((weights @ front.T).max(axis=1).sum())
        remaining -= m
    return total / n_weights


# ---------------------------------------------------------------------------
# Sparsity


def sparsity(archive: ParetoArchive | np.ndarray) -> float:
    """Mean squared gap between consecutive sorted objective values.

    Duplicate return vectors are collapsed first so repeated points cannot
    deflate the score. Archives of size <= 1 return 0 by convention (the
    metric is undefined there; callers should report that separately).
    """
    front = archive.matrix() if isinstance(archive, ParetoArchive) else np.asarray(archive, dtype=np.float64)
    front = np.unique(front, axis=0)
    m = front.shape[0]
    if m <= 1:
        return 0.0
    sorted_desc = -np.sort(-front, axis=0)
    gaps = np.diff(sorted_desc, axis=0)
    return float(np.sum(gaps**2) / (m - 1))


# ---------------------------------------------------------------------------
# Front table I/O (plain CSV, header: policy_id,obj_1,...,obj_d,stage)


def save_front_table(path: str | Path, archive: ParetoArchive) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy_id"] + [f"obj_{i + 1}" for i in range(archive.d)] + ["stage"])
        for p in archive.points:
            writer.writerow([p.policy_id] + [repr(float(v)) for v in p.returns] + [p.stage])


def load_front_table(path: str | Path) -> ParetoArchive:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "policy_id" or header[-1] != "stage":
            raise ValueError(f"{path}: not a front table (header {header})")
        d = len(header) - 2
        points = []
        for row in reader:
            if not row:
                continue
            if len(row) != d + 2:
                raise ValueError(f"{path}: row has {len(row)} fields, expected {d + 2}")
            points.append(
                FrontPoint(
                    returns=np.array([float(v) for v in row[1 : 1 + d]]),
                    policy_id=row[0],
                    stage=row[-1],
                )
            )
    if not points:
        raise ValueError(f"{path}: front table has no rows")
    return ParetoArchive(points=points, d=d)


def default_reference_point(all_returns: Iterable[np.ndarray], margin: float = 1.0) -> np.ndarray:
    """Componentwise minimum over every evaluated policy, minus a margin."""
    stacked = np.stack([np.asarray(r, dtype=np.float64) for r in all_returns])
    return stacked.min(axis=0) - margin
