"""Five-stage Pareto front construction around parameter-space extension.

1. Train K base policies under evenly spread preference weights.
2. For each base, briefly retrain under d-1 shifted weights and record
   the parameter and weight differences as local directions.
3. Generate candidates training-free on a grid of direction
   coefficients: theta = base + sum_i alpha_i * dtheta_i, each with a
   matched weight w = w_base + sum_i alpha_i * dw_i.
4. Evaluate candidates and keep the pooled non-dominated subset.
5. Fine-tune each survivor briefly under its matched weight; the final
   archive is the non-dominated filter over survivors, fine-tuned
   policies, and the bases themselves.

The interaction budget is split 3:1:1 over the three training stages
(the extension stage trains nothing), divided evenly over each stage's
runs at whole-batch granularity; every environment step, including
evaluation rollouts, is tallied in a ledger.
"""

from __future__ import annotations

import contextlib
import itertools
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .envs import VectorRewardEnv, check_weight
from .pareto import FrontPoint, ParetoArchive, dominates, non_dominated_filter
from .policy import ParameterVector, ReturnVector, evaluate_returns
from .ppo import DivergenceError, PpoConfig, init_actor_critic, train
from .seeding import derive_seed


@dataclass(frozen=True)
class LleConfig:
    """Pipeline knobs: base count, shift, coefficient grid, budgets."""

    K: int = 6
    delta_s: float = 0.1
    alpha_start: float = -1.5
    alpha_end: float = 1.5
    delta_alpha: float = 0.05
    T_init: int | None = None  # per-run overrides; None = derive from the 3:1:1 split
    T_dir: int | None = None
    T_ref: int | None = None
    eval_episodes: int = 8
    final_eval_episodes: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if not 0.0 < self.delta_s <= 0.5:
            raise ValueError("delta_s must be in (0, 0.5]")
        if self.alpha_start >= self.alpha_end:
            raise ValueError("alpha_start must be below alpha_end")
        if self.delta_alpha <= 0:
            raise ValueError("delta_alpha must be positive")


def alpha_grid(alpha_start: float, alpha_end: float, delta_alpha: float) -> np.ndarray:
    """Coefficient values alpha_start + i * delta, i = 0..M-1.

    M = floor((end - start) / delta) + 1, with a small epsilon so grids
    meant to land exactly on the endpoint are not cut short by rounding.
    """
    m = int(math.floor((alpha_end - alpha_start) / delta_alpha + 1e-9)) + 1
    return alpha_start + delta_alpha * np.arange(m)


def make_base_weights(k: int, d: int) -> list[np.ndarray]:
    """K preference weights spread evenly over the (d-1)-simplex."""
    if k < 2:
        raise ValueError("need at least two base weights")
    if d == 2:
        firsts = np.linspace(1.0, 0.0, k)
        return [np.array([w, 1.0 - w]) for w in firsts]
    # Uniform lattice at the finest resolution whose size does not exceed
    # k, or the next one truncated (descending lexicographic) when no
    # resolution matches exactly.
    def lattice(res: int) -> list[tuple[int, ...]]:
        return sorted(_compositions(res, d), reverse=True)

    res = 1
    while math.comb(res + d - 1, d - 1) < k:
        res += 1
    points = lattice(res)
    if len(points) > k and res > 1 and math.comb(res - 1 + d - 1, d - 1) == k:
        points = lattice(res - 1)
    return [np.array(p, dtype=np.float64) / sum(p) for p in points[:k]]


def _compositions(total: int, parts: int) -> list[tuple[int, ...]]:
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        out.extend((first, *rest) for rest in _compositions(total - first, parts - 1))
    return out


def shift_weight(weight: np.ndarray, direction_index: int, delta_s: float) -> np.ndarray:
    """Nearby preference for directional retraining.

    d=2: subtract delta_s from the first coordinate, reflecting the shift
    when that would leave [0, 1]. d>=3: move delta_s of mass from the
    largest coordinate toward the direction_index-th other coordinate
    with the same reflection rule, then renormalize.
    """
    weight = check_weight(np.asarray(weight, dtype=np.float64))
    d = weight.shape[0]
    if delta_s >= 1.0 or delta_s <= 0.0:
        raise ValueError("delta_s must be in (0, 1)")
    if not 1 <= direction_index <= d - 1:
        raise ValueError(f"direction_index must be in [1, {d - 1}]")
    if d == 2:
        if 0.0 <= weight[0] - delta_s <= 1.0:
            return np.array([weight[0] - delta_s, weight[1] + delta_s])
        return np.array([weight[0] + delta_s, weight[1] - delta_s])
    source = int(np.argmax(weight))
    others = [i for i in range(d) if i != source]
    target = others[direction_index - 1]
    shifted = weight.copy()
    if 0.0 <= weight[source] - delta_s <= 1.0 and weight[target] + delta_s <= 1.0:
        shifted[source] -= delta_s
        shifted[target] += delta_s
    else:
        shifted[source] += delta_s
        shifted[target] -= delta_s
    shifted = np.clip(shifted, 0.0, 1.0)
    return shifted / shifted.sum()


def clip_to_simplex(raw: np.ndarray) -> np.ndarray:
    """Project a matched weight back onto the simplex by clip + renormalize."""
    clipped = np.clip(raw, 0.0, 1.0)
    total = clipped.sum()
    if total <= 0.0:
        return np.full(raw.shape, 1.0 / raw.shape[0])
    return clipped / total


@dataclass
class DirectionSet:
    """Local extension directions for one base policy."""

    base_theta: ParameterVector
    base_w: np.ndarray
    deltas: list[ParameterVector]
    weight_deltas: list[np.ndarray]
    retrained_thetas: list[ParameterVector]
    base_returns: ReturnVector | None = None
    retrained_returns: list[ReturnVector] = field(default_factory=list)
    mutual_non_dominated: list[bool] = field(default_factory=list)
    degenerate: bool = False

    @property
    def m(self) -> int:
        return len(self.deltas)

    def direction_matrix(self) -> np.ndarray:
        return np.stack([d.data for d in self.deltas], axis=1)


def check_degenerate(direction_matrix: np.ndarray, rel_tol: float = 1e-8) -> bool:
    svals = np.linalg.svd(direction_matrix, compute_uv=False)
    return bool(svals.min() <= rel_tol * svals.max())


@dataclass
class CandidatePolicy:
    """A policy flowing through extension, selection, and fine-tuning."""

    theta: ParameterVector
    matched_w: np.ndarray
    raw_w: np.ndarray
    base_index: int
    alphas: tuple[float, ...]
    stage: str  # "extended" or "fine_tuned"
    policy_id: int
    returns: ReturnVector | None = None

    @property
    def is_base(self) -> bool:
        return all(a == 0.0 for a in self.alphas)


@dataclass
class BudgetLedger:
    """Environment steps actually consumed, by pipeline stage."""

    total_budget: int = 0
    init_steps: int = 0
    retrain_steps: int = 0
    extension_training_steps: int = 0  # stays zero: extension is training-free
    finetune_steps: int = 0
    eval_steps: int = 0

    @property
    def training_steps(self) -> int:
        return (
            self.init_steps
            + self.retrain_steps
            + self.extension_training_steps
            + self.finetune_steps
        )

    @property
    def grand_total(self) -> int:
        return self.training_steps + self.eval_steps

    def as_dict(self) -> dict[str, int]:
        return {
            "total_budget": self.total_budget,
            "init_steps": self.init_steps,
            "retrain_steps": self.retrain_steps,
            "extension_training_steps": self.extension_training_steps,
            "finetune_steps": self.finetune_steps,
            "eval_steps": self.eval_steps,
            "training_steps": self.training_steps,
            "grand_total": self.grand_total,
        }


class _Evaluator:
    """Counted, cached policy evaluation with one seed per evaluation grade.

    Caching keys on the exact parameter bytes, so identical policies
    always receive identical return vectors within a run.
    """

    def __init__(self, env: VectorRewardEnv, ledger: BudgetLedger):
        self.env = env
        self.ledger = ledger
        self._cache: dict[tuple[bytes, int, int], ReturnVector] = {}

    def evaluate(self, theta: ParameterVector, episodes: int, seed: int) -> ReturnVector:
        key = (theta.data.tobytes(), episodes, seed)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        result = evaluate_returns(theta, self.env, episodes, seed, deterministic=True)
        self.ledger.eval_steps += episodes * self.env.spec.horizon
        self._cache[key] = result
        return result


@contextlib.contextmanager
def _train_log(log_dir: Path | None, name: str):
    if log_dir is None:
        yield None
        return
    log_dir.mkdir(parents=True, exist_ok=True)
    with open(log_dir / f"{name}.log", "w") as fh:
        yield fh


def directional_retrain(
    base_theta: ParameterVector,
    base_w: np.ndarray,
    env: VectorRewardEnv,
    cfg: LleConfig,
    ppo_cfg: PpoConfig,
    t_dir: int | list[int],
    seed_root: int,
    base_index: int,
    evaluator: _Evaluator | None = None,
    ledger: BudgetLedger | None = None,
    log_dir: Path | None = None,
) -> DirectionSet:
    """Estimate d-1 local directions by brief retraining at shifted weights.

    The base and each retrained policy are checked for mutual
    non-dominance at final evaluation grade; a violation or a rank
    deficient direction matrix is flagged, never raised, so degenerate
    runs still complete with whatever directions they found.
    """
    d = env.spec.d
    t_dirs = [t_dir] * (d - 1) if isinstance(t_dir, int) else list(t_dir)
    if len(t_dirs) != d - 1:
        raise ValueError(f"need one retraining budget per direction ({d - 1})")
    ledger = ledger if ledger is not None else BudgetLedger()
    evaluator = evaluator if evaluator is not None else _Evaluator(env, ledger)
    final_seed = derive_seed(seed_root, "eval.final")
    dirs = DirectionSet(base_theta=base_theta, base_w=base_w, deltas=[], weight_deltas=[], retrained_thetas=[])
    dirs.base_returns = evaluator.evaluate(base_theta, cfg.final_eval_episodes, final_seed)
    for i in range(1, d):
        shifted = shift_weight(base_w, i, cfg.delta_s)
        with _train_log(log_dir, f"retrain_{base_index}_{i}") as log:
            retrained = train(
                base_theta,
                env,
                shifted,
                t_dirs[i - 1],
                ppo_cfg,
                seed=derive_seed(seed_root, "retrain", base_index, i),
                log_stream=log,
            )
        ledger.retrain_steps += (t_dirs[i - 1] // ppo_cfg.steps_per_batch) * ppo_cfg.steps_per_batch
        dirs.retrained_thetas.append(retrained)
        dirs.deltas.append(ParameterVector(retrained.data - base_theta.data, base_theta.layout))
        dirs.weight_deltas.append(shifted - base_w)
        r = evaluator.evaluate(retrained, cfg.final_eval_episodes, final_seed)
        dirs.retrained_returns.append(r)
        incomparable = not dominates(dirs.base_returns.values, r.values) and not dominates(
            r.values, dirs.base_returns.values
        )
        dirs.mutual_non_dominated.append(incomparable)
        if not incomparable:
            warnings.warn(
                f"base {base_index} and its direction-{i} retrain are not mutually "
                "non-dominated; keeping the direction",
                stacklevel=2,
            )
    dirs.degenerate = check_degenerate(dirs.direction_matrix())
    if dirs.degenerate:
        warnings.warn(f"direction matrix for base {base_index} is rank deficient", stacklevel=2)
    return dirs


def extend(
    dirs: DirectionSet,
    cfg: LleConfig,
    env: VectorRewardEnv,
    base_index: int,
    id_start: int,
    evaluator: _Evaluator,
    eval_seed: int,
) -> list[CandidatePolicy]:
    """Enumerate and evaluate the full coefficient grid for one base.

    No training happens here. The all-zero tuple reproduces the base and
    a lone unit coefficient reproduces that retrained policy, both taken
    verbatim so the landmarks are bit-exact.
    """
    grid = alpha_grid(cfg.alpha_start, cfg.alpha_end, cfg.delta_alpha)
    base = dirs.base_theta
    candidates = []
    next_id = id_start
    for alphas in itertools.product(grid, repeat=dirs.m):
        nonzero = [i for i, a in enumerate(alphas) if a != 0.0]
        if not nonzero:
            theta = base.copy()
        elif len(nonzero) == 1 and alphas[nonzero[0]] == 1.0:
            theta = dirs.retrained_thetas[nonzero[0]].copy()
        else:
            data = base.data.copy()
            for i, a in enumerate(alphas):
                if a != 0.0:
                    data += a * dirs.deltas[i].data
            theta = ParameterVector(data, base.layout)
        raw_w = dirs.base_w + sum(
            (a * dw for a, dw in zip(alphas, dirs.weight_deltas)), np.zeros(env.spec.d)
        )
        cand = CandidatePolicy(
            theta=theta,
            matched_w=clip_to_simplex(raw_w),
            raw_w=raw_w,
            base_index=base_index,
            alphas=tuple(float(a) for a in alphas),
            stage="extended",
            policy_id=next_id,
        )
        cand.returns = evaluator.evaluate(theta, cfg.eval_episodes, eval_seed)
        candidates.append(cand)
        next_id += 1
    return candidates


def select_candidates(candidates: list[CandidatePolicy]) -> list[CandidatePolicy]:
    """Pooled non-dominated subset over the evaluated candidates."""
    if not candidates:
        return []
    for c in candidates:
        if c.returns is None:
            raise ValueError(f"candidate {c.policy_id} has not been evaluated")
    archive = non_dominated_filter(
        [FrontPoint(c.returns.values, c.policy_id, c.stage) for c in candidates]
    )
    keep = {p.policy_id for p in archive.points}
    return [c for c in candidates if c.policy_id in keep]


def fine_tune(
    selected: list[CandidatePolicy],
    env: VectorRewardEnv,
    cfg: LleConfig,
    ppo_cfg: PpoConfig,
    budgets: list[int],
    seed_root: int,
    id_start: int,
    evaluator: _Evaluator,
    eval_seed: int,
    ledger: BudgetLedger,
    log_dir: Path | None = None,
) -> list[CandidatePolicy]:
    """Brief preference-aligned training of each selected candidate.

    Inputs are never mutated; each output carries stage "fine_tuned" and
    fresh returns. A diverging candidate is reported and skipped without
    aborting the rest of the batch.
    """
    if len(budgets) != len(selected):
        raise ValueError("need one budget per selected candidate")
    out = []
    next_id = id_start
    for cand, steps in zip(selected, budgets):
        try:
            with _train_log(log_dir, f"finetune_{cand.policy_id}") as log:
                theta = train(
                    cand.theta,
                    env,
                    cand.matched_w,
                    steps,
                    ppo_cfg,
                    seed=derive_seed(seed_root, "finetune", cand.policy_id),
                    log_stream=log,
                )
        except DivergenceError as err:
            warnings.warn(f"fine-tuning candidate {cand.policy_id} diverged: {err}", stacklevel=2)
            continue
        ledger.finetune_steps += (steps // ppo_cfg.steps_per_batch) * ppo_cfg.steps_per_batch
        tuned = CandidatePolicy(
            theta=theta,
            matched_w=cand.matched_w.copy(),
            raw_w=cand.raw_w.copy(),
            base_index=cand.base_index,
            alphas=cand.alphas,
            stage="fine_tuned",
            policy_id=next_id,
        )
        tuned.returns = evaluator.evaluate(theta, cfg.eval_episodes, eval_seed)
        out.append(tuned)
        next_id += 1
    return out


def _even_batch_split(total_steps: int, n_runs: int, batch: int) -> list[int]:
    """Split a stage budget over runs at whole-batch granularity.

    As even as whole batches allow; any remainder batches go to the
    earliest runs so small stage shares still train someone rather than
    rounding everyone to zero.
    """
    if n_runs == 0:
        return []
    batches = total_steps // batch
    base, extra = divmod(batches, n_runs)
    return [(base + (1 if j < extra else 0)) * batch for j in range(n_runs)]


@dataclass
class PipelineResult:
    """Everything a run produces: archives, provenance, and accounting."""

    archive: ParetoArchive
    base_archive: ParetoArchive
    selection_archive: ParetoArchive
    bases: list[CandidatePolicy]
    candidates: list[CandidatePolicy]
    selected: list[CandidatePolicy]
    fine_tuned: list[CandidatePolicy]
    directions: list[DirectionSet]
    final_values: dict[int, np.ndarray]
    ref_point: np.ndarray
    ledger: BudgetLedger
    policies_by_id: dict[int, CandidatePolicy]


def run_pipeline(
    env: VectorRewardEnv,
    cfg: LleConfig,
    ppo_cfg: PpoConfig,
    total_budget: int,
    log_dir: str | Path | None = None,
) -> PipelineResult:
    """Execute all five stages under one interaction budget.

    The budget is split 3:1:1 over initialization, directional
    retraining, and fine-tuning unless the config pins a stage
    explicitly. Every return vector entering the final archive is
    re-evaluated at final grade with a shared seed, so identical
    policies collapse exactly and stage-to-stage hypervolume can only
    grow.
    """
    d = env.spec.d
    m = d - 1
    seed_root = cfg.seed
    log_dir = Path(log_dir) if log_dir is not None else None
    ledger = BudgetLedger(total_budget=int(total_budget))
    evaluator = _Evaluator(env, ledger)
    batch = ppo_cfg.steps_per_batch

    init_share = 3 * total_budget // 5
    dir_share = total_budget // 5
    ref_share = total_budget // 5

    if cfg.T_init is not None:
        init_budgets = [cfg.T_init] * cfg.K
    else:
        init_budgets = _even_batch_split(init_share, cfg.K, batch)
        if min(init_budgets) < batch:
            raise ValueError(
                f"budget too small: initialization share {init_share} cannot give "
                f"each of {cfg.K} bases one batch of {batch} steps"
            )
    if cfg.T_dir is not None:
        dir_budgets = [cfg.T_dir] * (cfg.K * m)
    else:
        dir_budgets = _even_batch_split(dir_share, cfg.K * m, batch)
        if min(dir_budgets) < batch:
            raise ValueError(
                f"budget too small: retraining share {dir_share} cannot give each "
                f"of {cfg.K * m} direction runs one batch of {batch} steps"
            )

    weights = make_base_weights(cfg.K, d)
    select_seed = derive_seed(seed_root, "eval.select")
    final_seed = derive_seed(seed_root, "eval.final")

    # Stage 1: base policies.
    base_thetas = []
    for k, w in enumerate(weights):
        theta0 = init_actor_critic(env, derive_seed(seed_root, "net", k))
        with _train_log(log_dir, f"init_{k}") as log:
            theta = train(
                theta0, env, w, init_budgets[k], ppo_cfg,
                seed=derive_seed(seed_root, "init", k), log_stream=log,
            )
        ledger.init_steps += (init_budgets[k] // batch) * batch
        base_thetas.append(theta)

    # Stage 2: directions.
    directions = []
    for k, (theta, w) in enumerate(zip(base_thetas, weights)):
        dirs = directional_retrain(
            theta,
            w,
            env,
            cfg,
            ppo_cfg,
            dir_budgets[k * m : (k + 1) * m],
            seed_root,
            k,
            evaluator,
            ledger,
            log_dir,
        )
        directions.append(dirs)

    # Base policies as zero-coefficient candidates (ids 0..K-1) so the
    # final pool always contains them whatever the grid holds.
    bases = []
    for k, dirs in enumerate(directions):
        cand = CandidatePolicy(
            theta=dirs.base_theta,
            matched_w=weights[k].copy(),
            raw_w=weights[k].copy(),
            base_index=k,
            alphas=tuple([0.0] * m),
            stage="extended",
            policy_id=k,
        )
        cand.returns = evaluator.evaluate(cand.theta, cfg.eval_episodes, select_seed)
        bases.append(cand)

    # Stage 3: training-free extension.
    candidates = []
    next_id = cfg.K
    for k, dirs in enumerate(directions):
        if dirs.degenerate:
            warnings.warn(f"extending base {k} along a degenerate direction set", stacklevel=2)
        cands = extend(dirs, cfg, env, k, next_id, evaluator, select_seed)
        next_id += len(cands)
        candidates.extend(cands)

    # Stage 4: pooled selection.
    selected = select_candidates(candidates)

    # Stage 5: preference-aligned fine-tuning.
    if cfg.T_ref is not None:
        ft_budgets = [cfg.T_ref] * len(selected)
    else:
        ft_budgets = _even_batch_split(ref_share, len(selected), batch)
    fine_tuned = fine_tune(
        selected, env, cfg, ppo_cfg, ft_budgets, seed_root, next_id, evaluator, select_seed,
        ledger, log_dir,
    )

    # Final-grade re-evaluation of everything entering the archive pool.
    pool = bases + selected + fine_tuned
    final_values: dict[int, np.ndarray] = {}
    for cand in pool:
        final_values[cand.policy_id] = evaluator.evaluate(
            cand.theta, cfg.final_eval_episodes, final_seed
        ).values

    base_archive = non_dominated_filter(
        [FrontPoint(final_values[c.policy_id], c.policy_id, c.stage) for c in bases]
    )
    selection_archive = non_dominated_filter(
        [FrontPoint(final_values[c.policy_id], c.policy_id, c.stage) for c in bases + selected]
    )
    archive = non_dominated_filter(
        [FrontPoint(final_values[c.policy_id], c.policy_id, c.stage) for c in pool]
    )

    all_returns = [final_values[pid] for pid in final_values]
    all_returns.extend(c.returns.values for c in bases + candidates + fine_tuned)
    for dirs in directions:
        all_returns.extend(r.values for r in dirs.retrained_returns)
    ref_point = np.stack(all_returns).min(axis=0) - 1.0

    return PipelineResult(
        archive=archive,
        base_archive=base_archive,
        selection_archive=selection_archive,
        bases=bases,
        candidates=candidates,
        selected=selected,
        fine_tuned=fine_tuned,
        directions=directions,
        final_values=final_values,
        ref_point=ref_point,
        ledger=ledger,
        policies_by_id={c.policy_id: c for c in bases + candidates + fine_tuned},
    )
