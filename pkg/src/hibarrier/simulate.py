"""Hybrid solution candidates under selection policies, plus behavioral
counterexample search for invariance and contractivity."""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import geometry as geo
from .fields import EvaluationError, Grid, image_samples, filter_by_cone
from .model import (ArcInterval, BarrierCandidate, HybridArc, HybridSystem,
                    KComplex, ScenarioResult, STAYS_IN_K, scenario_classify)

__all__ = [
    "HORIZON_REACHED",
    "SOLUTION_DIES",
    "LEFT_C_UNION_D",
    "NUMERICAL_FAILURE",
    "Constant",
    "PerStepRandom",
    "AdversarialGrid",
    "Overlap",
    "SelectionPolicy",
    "Horizon",
    "FalsifyBudget",
    "FalsifyResult",
    "ProbeResult",
    "solve",
    "falsify_invariance",
    "probe_contractivity",
    "default_policy_pool",
    "arc_to_csv",
]

HORIZON_REACHED = "horizon_reached"
SOLUTION_DIES = "solution_dies"
LEFT_C_UNION_D = "left_c_union_d"
NUMERICAL_FAILURE = "numerical_failure"

_ZENO_MAX = 50


# ---------------------------------------------------------------------------
# Selection policies


@dataclass(frozen=True)
class Constant:
    lam: tuple[float, ...] = ()

    def __post_init__(self):
        if any(not (0.0 <= v <= 1.0) for v in self.lam):
            raise ValueError("constant flow/jump parameters must lie in [0,1]")


@dataclass(frozen=True)
class PerStepRandom:
    pass


@dataclass(frozen=True)
class AdversarialGrid:
    """Choose the parameter on a grid maximizing the one-step increase of max_i B_i."""

    d: int = 5

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("adversarial grid needs d >= 2")


Rule = Constant | PerStepRandom | AdversarialGrid


@dataclass(frozen=True)
class Overlap:
    kind: str = "flow"  # flow | jump | bernoulli
    p: float = 0.5


@dataclass(frozen=True)
class SelectionPolicy:
    flow: Rule = Constant()
    jump: Rule = Constant()
    overlap: Overlap = Overlap("flow")

    def label(self) -> str:
        def rule_label(r: Rule) -> str:
            if isinstance(r, Constant):
                return "const"
            if isinstance(r, PerStepRandom):
                return "random"
            return f"adv{r.d}"

        return f"{rule_label(self.flow)}/{rule_label(self.jump)}/{self.overlap.kind}"


@dataclass(frozen=True)
class Horizon:
    T: float
    J: int
    step: float = 1e-3
    refine_tol: float = 1e-12

    def __post_init__(self):
        if self.T < 0 or self.J < 0 or self.step <= 0:
            raise ValueError("need T >= 0, J >= 0, step > 0")


def default_policy_pool() -> tuple[SelectionPolicy, ...]:
    return (
        SelectionPolicy(AdversarialGrid(5), AdversarialGrid(5), Overlap("flow")),
        SelectionPolicy(AdversarialGrid(5), AdversarialGrid(5), Overlap("jump")),
        SelectionPolicy(PerStepRandom(), PerStepRandom(), Overlap("bernoulli", 0.5)),
    )


# ---------------------------------------------------------------------------
# Integration


def _rk4(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _lambda_candidates(k: int, rule: Rule, rng: np.random.Generator) -> list[np.ndarray]:
    if k == 0:
        return [np.zeros(0)]
    if isinstance(rule, Constant):
        lam = np.asarray(rule.lam if rule.lam else [0.5] * k, dtype=float)
        return [lam]
    if isinstance(rule, PerStepRandom):
        return [rng.uniform(size=k)]
    axes = np.linspace(0.0, 1.0, rule.d)
    mesh = np.meshgrid(*([axes] * k), indexing="ij")
    return [np.array(v) for v in zip(*(m.ravel() for m in mesh))]


def _select_flow_lambda(H: HybridSystem, x: np.ndarray, rule: Rule, h: float,
                        rng: np.random.Generator,
                        bar: Callable[[np.ndarray], float] | None) -> np.ndarray:
    cands = _lambda_candidates(H.F.k, rule, rng)
    if len(cands) == 1 or bar is None:
        return cands[0]
    best, best_val = cands[0], -np.inf
    for lam in cands:
        try:
            x_next = _rk4(lambda y: H.F(y, lam), x, h)
            val = bar(x_next)
        except (EvaluationError, FloatingPointError):
            continue
        if np.isfinite(val) and val > best_val:
            best, best_val = lam, val
    return best


def _select_jump_lambda(H: HybridSystem, x: np.ndarray, rule: Rule,
                        rng: np.random.Generator,
                        bar: Callable[[np.ndarray], float] | None) -> np.ndarray:
    cands = _lambda_candidates(H.G.k, rule, rng)
    if len(cands) == 1 or bar is None:
        return cands[0]
    best, best_val = cands[0], -np.inf
    for lam in cands:
        try:
            val = bar(H.G(x, lam))
        except (EvaluationError, FloatingPointError):
            continue
        if np.isfinite(val) and val > best_val:
            best, best_val = lam, val
    return best


def solve(H: HybridSystem, x0: Sequence[float] | np.ndarray,
          policy: SelectionPolicy, horizon: Horizon, *,
          kc: KComplex | None = None, seed: int | tuple = 0,
          flow_tol: float = 1e-9, s0_tol: float = 1e-6,
          stop_when: Callable[[np.ndarray], bool] | None = None) -> HybridArc:
    """Compute a hybrid solution candidate.

    Flow segments use a classical 4-stage one-step method with fixed step on
    the policy-selected f(., lam); guard events (leaving C, entering D under a
    jump-preferring policy) are located by bisection to horizon.refine_tol.
    """
    x0 = np.asarray(x0, dtype=float)
    c_closed = H.C.closure()
    if (c_closed.classify(x0, s0_tol) == geo.Membership.OUTSIDE
            and H.D.classify(x0, s0_tol) == geo.Membership.OUTSIDE):
        raise geo.PreconditionError("x0 violates (S0): outside cl(C) u D")
    seed_key = seed if isinstance(seed, tuple) else (seed,)
    rng = np.random.default_rng((*(int(s) for s in seed_key), zlib.crc32(b"solve")))
    bar = (lambda y, _b=kc.barrier: _b.bar_value(y)) if kc is not None else None

    intervals = [ArcInterval(0, [0.0], [x0.copy()])]
    flags: list[str] = []
    t, j, x = 0.0, 0, x0.copy()
    cause = HORIZON_REACHED
    zeno_run = 0
    flowed_since_jump = True
    h_int = horizon.step
    max_steps = int(horizon.T / h_int * 4) + 8 * horizon.J + 2000
    blocked = False  # flow made no progress at the current state

    def record_flow(t_new: float, x_new: np.ndarray) -> None:
        intervals[-1].times.append(t_new)
        intervals[-1].states.append(x_new.copy())

    stopped = False
    if stop_when is not None and stop_when(x):
        stopped = True
        flags.append("stopped-by-predicate")

    for _ in range(max_steps):
        if stopped or t >= horizon.T - 1e-15:
            break
        try:
            in_c = H.C.classify(x, flow_tol) != geo.Membership.OUTSIDE
            in_d = H.D.classify(x, flow_tol) != geo.Membership.OUTSIDE
        except EvaluationError:
            cause = NUMERICAL_FAILURE
            break
        if not in_c and not in_d:
            cause = LEFT_C_UNION_D
            break

        want_jump = False
        if in_d and (not in_c or blocked):
            want_jump = True
        elif in_d and in_c:
            if policy.overlap.kind == "jump":
                want_jump = True
            elif policy.overlap.kind == "bernoulli":
                want_jump = bool(rng.uniform() < policy.overlap.p)

        if want_jump:
            if j >= horizon.J:
                cause = HORIZON_REACHED
                flags.append("jump-budget")
                break
            lam = _select_jump_lambda(H, x, policy.jump, rng, bar)
            try:
                g = H.G(x, lam)
            except EvaluationError:
                cause = NUMERICAL_FAILURE
                break
            if not np.all(np.isfinite(g)):
                cause = NUMERICAL_FAILURE
                break
            if not flowed_since_jump:
                zeno_run += 1
                if zeno_run > _ZENO_MAX:
                    cause = HORIZON_REACHED
                    flags.append("zeno")
                    break
            else:
                zeno_run = 0
            j += 1
            x = g.copy()
            intervals.append(ArcInterval(j, [t], [x.copy()]))
            flowed_since_jump = False
            blocked = False
            if stop_when is not None and stop_when(x):
                stopped = True
                flags.append("stopped-by-predicate")
            continue

        if not in_c:
            cause = LEFT_C_UNION_D
            break

        # flow attempt
        h = min(h_int, horizon.T - t)
        lam = _select_flow_lambda(H, x, policy.flow, h, rng, bar)
        f = lambda y, _l=lam: H.F(y, _l)
        try:
            x_full = _rk4(f, x, h)
        except EvaluationError:
            cause = NUMERICAL_FAILURE
            break
        if not np.all(np.isfinite(x_full)):
            cause = NUMERICAL_FAILURE
            break

        exited = H.C.classify(x_full, flow_tol) == geo.Membership.OUTSIDE
        if exited:
            lo, x_lo = 0.0, x
            hi = h
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                x_mid = _rk4(f, x, mid)
                if H.C.classify(x_mid, flow_tol) == geo.Membership.OUTSIDE:
                    hi = mid
                else:
                    lo, x_lo = mid, x_mid
                if hi - lo < horizon.refine_tol:
                    break
            # progress below the membership-tolerance slack is numerical noise,
            # not flow; treat the state as blocked instead of recording it
            if lo > max(4e-6 * h, 1e-12):
                t += lo
                x = x_lo.copy()
                record_flow(t, x)
                flowed_since_jump = True
                blocked = False
                if stop_when is not None and stop_when(x):
                    stopped = True
                    flags.append("stopped-by-predicate")
                continue
            # no flow progress possible with this selection
            if H.D.classify(x, flow_tol) != geo.Membership.OUTSIDE:
                blocked = True
                continue
            moved = _attempt_feasible_flow(H, x, h, rng, flow_tol)
            if moved is None:
                cause = SOLUTION_DIES
                flags.append("dies-sampled")
                break
            tau, x_new = moved
            t += tau
            x = x_new
            record_flow(t, x)
            flowed_since_jump = True
            blocked = False
        else:
            if policy.overlap.kind == "jump" and not in_d:
                entered = H.D.classify(x_full, flow_tol) != geo.Membership.OUTSIDE
                if entered:
                    lo, hi = 0.0, h
                    x_hi = x_full
                    for _ in range(80):
                        mid = 0.5 * (lo + hi)
                        x_mid = _rk4(f, x, mid)
                        if H.D.classify(x_mid, flow_tol) != geo.Membership.OUTSIDE:
                            hi, x_hi = mid, x_mid
                        else:
                            lo = mid
                        if hi - lo < horizon.refine_tol:
                            break
                    if hi > 1e-14:
                        t += hi
                        x = x_hi.copy()
                        record_flow(t, x)
                        flowed_since_jump = True
                        blocked = False
                        if stop_when is not None and stop_when(x):
                            stopped = True
                            flags.append("stopped-by-predicate")
                        continue
            t += h
            x = x_full.copy()
            record_flow(t, x)
            flowed_since_jump = True
            blocked = False
        if stop_when is not None and stop_when(x):
            stopped = True
            flags.append("stopped-by-predicate")
    else:
        flags.append("step-budget")

    return HybridArc(intervals=intervals, termination=cause, flags=flags)


def _attempt_feasible_flow(H: HybridSystem, x: np.ndarray, h: float,
                           rng: np.random.Generator,
                           flow_tol: float) -> tuple[float, np.ndarray] | None:
    """At a boundary point of C (outside D): look for a flow selection that
    makes progress. None means no sampled direction works (solution dies)."""
    etas = image_samples(H.F, x, Grid(5))
    kept = filter_by_cone(etas, H.C, x)
    if not kept:
        return None
    for lam in _lambda_candidates(H.F.k, AdversarialGrid(5), rng):
        f = lambda y, _l=lam: H.F(y, _l)
        for shrink in (1.0, 0.25, 0.0625):
            try:
                x_try = _rk4(f, x, h * shrink)
            except EvaluationError:
                continue
            if (np.all(np.isfinite(x_try))
                    and H.C.classify(x_try, flow_tol) != geo.Membership.OUTSIDE):
                return h * shrink, x_try
    return None


# ---------------------------------------------------------------------------
# Counterexample search


@dataclass(frozen=True)
class FalsifyBudget:
    starts: int = 50
    horizon: Horizon = Horizon(2.0, 8, 5e-3)
    policies: tuple[SelectionPolicy, ...] = field(default_factory=default_policy_pool)
    boundary_band: float = 1e-7
    exit_tol: float = 1e-6


@dataclass
class FalsifyResult:
    found: bool
    arc: HybridArc | None = None
    scenario: ScenarioResult | None = None
    start: np.ndarray | None = None
    start_index: int = -1
    policy_index: int = -1
    stats: dict = field(default_factory=dict)


def _start_points(kc: KComplex, box, n: int, band: float, seed: int) -> list[np.ndarray]:
    n_boundary = max(1, n // 2)
    pts = list(kc.sample_boundary_k(box, n_boundary, band, seed=seed).points)
    pts.extend(kc.sample_k(box, n - len(pts), seed=seed ^ 0x5EED).points)
    return pts[:n]


def falsify_invariance(H: HybridSystem, kc: KComplex, budget: FalsifyBudget, *,
                       box, seed: int = 0, workers: int = 1) -> FalsifyResult:
    """Multi-start search for an arc leaving K; policies from the pool cycle
    across starts. Deterministic for fixed seed and identical across worker
    counts (ordered chunks, lexicographic pick)."""
    starts = _start_points(kc, box, budget.starts, budget.boundary_band, seed)
    policies = budget.policies
    K = kc.K
    exit_tol = budget.exit_tol

    def run(task_index: int) -> tuple[int, HybridArc, ScenarioResult] | None:
        s_idx = task_index
        p_idx = task_index % len(policies)
        x0 = starts[s_idx]
        try:
            arc = solve(H, x0, policies[p_idx], budget.horizon, kc=kc,
                        seed=(seed, s_idx, p_idx),
                        stop_when=lambda y: K.classify(y, exit_tol) == geo.Membership.OUTSIDE)
            scenario = scenario_classify(arc, K, exit_tol)
        except (geo.PreconditionError, geo.NonConvergence, EvaluationError):
            return None
        if scenario.kind != STAYS_IN_K:
            return (task_index, arc, scenario)
        return None

    total = len(starts)
    chunk = max(8, 4 * max(workers, 1))
    done = 0
    hits: list[tuple[int, HybridArc, ScenarioResult]] = []
    while done < total:
        indices = range(done, min(done + chunk, total))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, indices))
        else:
            results = [run(i) for i in indices]
        done = indices.stop
        hits = [r for r in results if r is not None]
        if hits:
            break
    stats = {"starts": len(starts), "policies": len(policies), "tasks_run": done}
    if not hits:
        return FalsifyResult(found=False, stats=stats)
    task_index, arc, scenario = min(hits, key=lambda r: r[0])
    return FalsifyResult(found=True, arc=arc, scenario=scenario, start=starts[task_index],
                         start_index=task_index,
                         policy_index=task_index % len(policies), stats=stats)


# ---------------------------------------------------------------------------
# Contractivity probe


@dataclass
class ProbeResult:
    lingering: bool  # True => BoundaryLingering, False => ImmediateEntry
    witness_arc: HybridArc | None = None
    witness_start: np.ndarray | None = None
    note: str = ""
    stats: dict = field(default_factory=dict)


def probe_contractivity(H: HybridSystem, kc: KComplex, budget: FalsifyBudget,
                        tau_probe: float, *, box, seed: int = 0,
                        starts: Sequence[np.ndarray] | None = None,
                        entry_margin: float = 1e-4,
                        workers: int = 1) -> ProbeResult:
    """From dK starts, test immediate entry of max_i B_i below -entry_margin
    after the first nontrivial flow step or jump within (0, tau_probe]."""
    if tau_probe <= 0:
        raise geo.PreconditionError("tau_probe must be positive")
    if starts is not None:
        pts = [np.asarray(s, dtype=float) for s in starts]
        for s in pts:
            if kc.K.classify(s, budget.boundary_band) == geo.Membership.INSIDE:
                raise geo.PreconditionError("probe start lies in int(K); must start on dK")
    else:
        pts = list(kc.sample_boundary_k(box, budget.starts, budget.boundary_band,
                                        seed=seed).points)
    horizon = Horizon(tau_probe, 2, min(budget.horizon.step, tau_probe / 20.0))
    policies = (SelectionPolicy(Constant(), Constant(), Overlap("jump")),
                SelectionPolicy(Constant(), Constant(), Overlap("flow")))
    exit_tol = budget.exit_tol

    def run(task_index: int) -> tuple[int, str, HybridArc] | None:
        s_idx, p_idx = divmod(task_index, len(policies))
        try:
            arc = solve(H, pts[s_idx], policies[p_idx], horizon, kc=kc,
                        seed=(seed, s_idx, p_idx))
        except (geo.PreconditionError, geo.NonConvergence, EvaluationError):
            return None
        vals = [kc.barrier.bar_value(x) for t, j, x in arc.samples()
                if (t, j) != (0.0, 0) and t <= tau_probe]
        if not vals:
            return None  # only the trivial solution was produced
        worst = max(vals)
        if worst > exit_tol:
            return (task_index, "left", arc)
        # lingering means the band [-entry_margin, tol] holds throughout;
        # dipping below the margin anywhere counts as entry
        if min(vals) >= -entry_margin:
            return (task_index, "lingered", arc)
        return None

    total = len(pts) * len(policies)
    chunk = max(8, 4 * max(workers, 1))
    done = 0
    hits: list[tuple[int, str, HybridArc]] = []
    while done < total:
        indices = range(done, min(done + chunk, total))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, indices))
        else:
            results = [run(i) for i in indices]
        done = indices.stop
        hits = [r for r in results if r is not None]
        if hits:
            break
    stats = {"starts": len(pts), "tasks_run": done}
    if not hits:
        return ProbeResult(lingering=False, stats=stats)
    task_index, kind, arc = min(hits, key=lambda r: r[0])
    s_idx = task_index // len(policies)
    note = ("arc leaves K from the boundary" if kind == "left"
            else "max_i B_i stays within the boundary band along the arc")
    return ProbeResult(lingering=True, witness_arc=arc, witness_start=pts[s_idx],
                       note=note, stats=stats)


# ---------------------------------------------------------------------------
# Arc CSV (the plotting interface)


def arc_to_csv(arc: HybridArc, barrier: BarrierCandidate | None = None) -> str:
    n = arc.intervals[0].states[0].size
    m = barrier.m if barrier is not None else 0
    header = ["t", "j"] + [f"x{i + 1}" for i in range(n)] + [f"B{i + 1}" for i in range(m)] + ["flag"]
    lines = [",".join(header)]
    rows = list(arc.samples())
    for idx, (t, j, x) in enumerate(rows):
        flag = ""
        if idx > 0 and rows[idx - 1][1] != j:
            flag = "jump"
        if idx == len(rows) - 1:
            flag = arc.termination if not flag else f"jump;{arc.termination}"
        cells = [repr(float(t)), str(j)]
        cells += [repr(float(v)) for v in x]
        if barrier is not None:
            cells += [repr(float(v)) for v in barrier.values(x)]
        cells.append(flag)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
