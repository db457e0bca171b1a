"""Synthetic parameter-to-performance landscapes with known Pareto sets.

Each objective is a concave quadratic V_i(theta) = -(theta - c_i)' A_i
(theta - c_i) with SPD curvature A_i. For d = 2 the exact Pareto set is
the weighted-optimum path

    theta*(u) = ((1-u) A_1 + u A_2)^{-1} ((1-u) A_1 c_1 + u A_2 c_2)

for u in [0, 1] (the segment [c_1, c_2] when both curvatures are the
identity). This gives a closed-form stand-in for policy returns, so the
extrapolation error order of the linear extension step can be measured
directly: distances to the front vanish with the step coefficient and
grow second-order once curvature bends the lifted set.

Directions are produced the way the training pipeline produces them,
minus the RL noise: brief retraining under a shifted preference is
replaced by one exact gradient ascent step of the shifted scalarized
objective, taken at the converged base point. Note that at a Pareto
point the Jacobian of V has rank d-1 with image tangent to the front,
so a chord through a second front point or a tangent estimate both
suppress the second-order error term this harness is meant to expose;
the single gradient step is the faithful, generic choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class QuadraticObjectiveFamily:
    """d concave quadratic objectives over R^n."""

    centers: np.ndarray  # (d, n)
    curvatures: np.ndarray  # (d, n, n), each SPD

    def __post_init__(self) -> None:
        self.centers = np.asarray(self.centers, dtype=np.float64)
        self.curvatures = np.asarray(self.curvatures, dtype=np.float64)
        d, n = self.centers.shape
        if self.curvatures.shape != (d, n, n):
            raise ValueError("curvatures must be one (n, n) matrix per objective")
        for i, a in enumerate(self.curvatures):
            if not np.allclose(a, a.T):
                raise ValueError(f"curvature {i} is not symmetric")
            if np.linalg.eigvalsh(a).min() <= 0:
                raise ValueError(f"curvature {i} is not positive definite")

    @property
    def d(self) -> int:
        return self.centers.shape[0]

    @property
    def n(self) -> int:
        return self.centers.shape[1]

    def values(self, theta: np.ndarray) -> np.ndarray:
        """V(theta), one entry per objective. Accepts (n,) or (k, n)."""
        theta = np.asarray(theta, dtype=np.float64)
        single = theta.ndim == 1
        pts = theta[None, :] if single else theta
        out = np.empty((pts.shape[0], self.d))
        for i in range(self.d):
            diff = pts - self.centers[i]
            out[:, i] = -np.einsum("kj,jl,kl->k", diff, self.curvatures[i], diff)
        return out[0] if single else out

    def scalarized_optimum(self, weight: np.ndarray) -> np.ndarray:
        """Exact maximizer of w . V, the converged-training stand-in."""
        weight = np.asarray(weight, dtype=np.float64)
        lhs = np.einsum("i,ijk->jk", weight, self.curvatures)
        rhs = np.einsum("i,ijk,ik->j", weight, self.curvatures, self.centers)
        return np.linalg.solve(lhs, rhs)

    def scalarized_gradient(self, weight: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Gradient of w . V at theta."""
        weight = np.asarray(weight, dtype=np.float64)
        theta = np.asarray(theta, dtype=np.float64)
        grad = np.zeros(self.n)
        for i in range(self.d):
            grad += weight[i] * (-2.0) * (self.curvatures[i] @ (theta - self.centers[i]))
        return grad


def ppr_delta(fam: QuadraticObjectiveFamily, theta: np.ndarray, dtheta: np.ndarray) -> np.ndarray:
    """Performance shift V(theta + dtheta) - V(theta), in closed form."""
    theta = np.asarray(theta, dtype=np.float64)
    dtheta = np.asarray(dtheta, dtype=np.float64)
    if theta.shape != dtheta.shape or theta.shape != (fam.n,):
        raise ValueError("theta and dtheta must both have the family's dimension")
    return fam.values(theta + dtheta) - fam.values(theta)


def lipschitz_probe(
    fam: QuadraticObjectiveFamily,
    region_radius: float,
    n_samples: int,
    seed: int,
    center: np.ndarray | None = None,
) -> float:
    """Empirical lower bound on the local Lipschitz constant of V.

    Max of ||V(a) - V(b)|| / ||a - b|| over sampled pairs inside the ball.
    """
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    if center is None:
        center = np.zeros(fam.n)
    # Uniform in the ball: gaussian direction, radius ~ r * u^(1/n).
    def ball(k: int) -> np.ndarray:
        dirs = rng.standard_normal((k, fam.n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = region_radius * rng.uniform(size=(k, 1)) ** (1.0 / fam.n)
        return center + dirs * radii

    a, b = ball(n_samples), ball(n_samples)
    gap = np.linalg.norm(a - b, axis=1)
    keep = gap > 1e-12
    ratios = np.linalg.norm(fam.values(a) - fam.values(b), axis=1)[keep] / gap[keep]
    return float(ratios.max())


# ---------------------------------------------------------------------------
# Exact fronts and extrapolation error curves


def pareto_path(fam: QuadraticObjectiveFamily, n_points: int = 100_001) -> tuple[np.ndarray, np.ndarray]:
    """Dense parameterization of the exact Pareto set and front (d = 2)."""
    if fam.d != 2:
        raise ValueError("analytic Pareto path implemented for d = 2")
    us = np.linspace(0.0, 1.0, n_points)
    thetas = np.empty((n_points, fam.n))
    for j, u in enumerate(us):
        thetas[j] = fam.scalarized_optimum(np.array([1.0 - u, u]))
    return thetas, fam.values(thetas)


def polyline_distance(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """Min Euclidean distance from each query point to a polyline.

    Distances go to the segments, not only the vertices, so the
    discretization error is second order in the vertex spacing.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    seg_a = polyline[:-1]
    seg_v = polyline[1:] - seg_a
    seg_len2 = np.maximum(np.sum(seg_v**2, axis=1), 1e-300)
    out = np.empty(points.shape[0])
    for i, p in enumerate(points):
        t = np.clip(np.sum((p - seg_a) * seg_v, axis=1) / seg_len2, 0.0, 1.0)
        nearest = seg_a + t[:, None] * seg_v
        out[i] = np.sqrt(np.min(np.sum((p - nearest) ** 2, axis=1)))
    return out


@dataclass
class ErrorCurve:
    """Extrapolation error against the exact front, by step-coefficient size."""

    alpha_norms: np.ndarray
    distances: np.ndarray
    fit_window: tuple[float, float] = (0.05, 0.5)
    fitted_slope: float = field(init=False, default=float("nan"))

    def __post_init__(self) -> None:
        self.alpha_norms = np.asarray(self.alpha_norms, dtype=np.float64)
        self.distances = np.asarray(self.distances, dtype=np.float64)
        if np.any(np.diff(self.alpha_norms) <= 0):
            raise ValueError("alpha norms must be strictly increasing")
        if np.any(self.distances < 0):
            raise ValueError("distances must be nonnegative")
        self.fitted_slope = self._fit_slope()

    def _fit_slope(self) -> float:
        lo, hi = self.fit_window
        mask = (self.alpha_norms >= lo) & (self.alpha_norms <= hi) & (self.distances > 0)
        if mask.sum() < 2:
            return float("nan")
        x = np.log(self.alpha_norms[mask])
        y = np.log(self.distances[mask])
        slope, _ = np.polyfit(x, y, 1)
        return float(slope)


def retrain_directions(
    fam: QuadraticObjectiveFamily,
    base_weight: np.ndarray,
    delta_s: float,
    step_size: float = 1.0,
) -> np.ndarray:
    """Directions from a single exact gradient step at shifted preferences.

    Column i is step_size * grad of (w + delta (e_i - e_0)) . V at the
    base optimum: the update brief retraining would take first. The base
    is stationary for its own weight, so these columns vanish as
    delta_s -> 0 and span the local trade-off directions otherwise.
    """
    base_weight = np.asarray(base_weight, dtype=np.float64)
    base_theta = fam.scalarized_optimum(base_weight)
    m = fam.d - 1
    cols = []
    for i in range(1, m + 1):
        shifted = base_weight.copy()
        shifted[0] -= delta_s
        shifted[i] += delta_s
        cols.append(step_size * fam.scalarized_gradient(shifted, base_theta))
    return np.stack(cols, axis=1)


def lle_error_curve(
    fam: QuadraticObjectiveFamily,
    base_theta: np.ndarray,
    directions: np.ndarray,
    alphas: np.ndarray,
    front_points: int = 100_001,
    fit_window: tuple[float, float] = (0.05, 0.5),
) -> ErrorCurve:
    """Distance from extrapolated returns to the exact front, per step size.

    theta(alpha) = base + D alpha; distance is measured in return space
    against the dense analytic front polyline.
    """
    base_theta = np.asarray(base_theta, dtype=np.float64)
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    if directions.shape[0] != fam.n:
        raise ValueError("direction matrix must have one row per parameter dimension")
    svals = np.linalg.svd(directions, compute_uv=False)
    if svals.min() <= 1e-8 * svals.max():
        raise ValueError("direction matrix is numerically rank deficient")
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.ndim == 1:
        alphas = alphas[:, None]
    _, front = pareto_path(fam, front_points)
    thetas = base_theta[None, :] + alphas @ directions.T
    dists = polyline_distance(fam.values(thetas), front)
    norms = np.linalg.norm(alphas, axis=1)
    order = np.argsort(norms)
    return ErrorCurve(
        alpha_norms=norms[order], distances=dists[order], fit_window=fit_window
    )


# ---------------------------------------------------------------------------
# Named desk-scale presets


def preset_family(name: str) -> QuadraticObjectiveFamily:
    """The flat and curved two-objective instances used by synth-check.

    flat: identity curvatures, so the lifted Pareto set is the straight
    segment between the centers and linear extrapolation along it is
    exact. curved: distinct curvatures with centers off the shared
    eigenvector, making the lifted set provably bent so the extension
    error grows second-order.
    """
    if name == "flat":
        return QuadraticObjectiveFamily(
            centers=np.array([[0.0, 0.0], [1.0, 0.0]]),
            curvatures=np.stack([np.eye(2), np.eye(2)]),
        )
    if name == "curved":
        return QuadraticObjectiveFamily(
            centers=np.array([[0.0, 0.0], [1.0, 1.0]]),
            curvatures=np.stack([np.eye(2), np.diag([1.0, 4.0])]),
        )
    raise ValueError(f"unknown preset {name!r}; choose 'flat' or 'curved'")


PRESET_BASE_WEIGHT = np.array([0.5, 0.5])
PRESET_DELTA_S = 0.1


def preset_error_curve(name: str, alphas: np.ndarray | None = None) -> ErrorCurve:
    """Error curve for a named preset with its standard base and directions."""
    fam = preset_family(name)
    if alphas is None:
        alphas = np.geomspace(0.01, 1.0, 41)
    base = fam.scalarized_optimum(PRESET_BASE_WEIGHT)
    directions = retrain_directions(fam, PRESET_BASE_WEIGHT, PRESET_DELTA_S)
    return lle_error_curve(fam, base, directions, alphas)
