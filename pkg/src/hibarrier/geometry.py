"""Constraint-described subsets of R^n: membership, cones, distance, sampling.

A set is a tree of sublevel constraints c(x) <= 0 combined by intersection and
union. Half-open leaves (c(x) < 0) keep strict membership at tolerance zero
and behave as their closure for distance and projection.
"""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .fields import EvaluationError, ScalarField, gradient

__all__ = [
    "Membership",
    "ConeVerdict",
    "NonConvergence",
    "PreconditionError",
    "Leaf",
    "Intersection",
    "Union",
    "SetDescription",
    "ConeQuery",
    "SampleResult",
    "Transversality",
    "distance",
    "project",
    "minkowski",
    "transversality_check",
    "contingent_cone_member_analytic",
    "contingent_cone_member_numeric",
    "contingent_min_ratio",
    "dm_cone_member",
    "external_cone_member",
    "external_min_ratio",
    "sample",
    "sample_boundary",
]


class Membership(enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


class ConeVerdict(enum.Enum):
    MEMBER = "member"
    NON_MEMBER = "non_member"
    NOT_APPLICABLE = "not_applicable"


class NonConvergence(RuntimeError):
    """The distance solver found no feasible point within its budget."""


class PreconditionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Set trees


@dataclass(frozen=True)
class Leaf:
    constraint: ScalarField
    strict: bool = False  # c(x) < 0 instead of c(x) <= 0


@dataclass(frozen=True)
class Intersection:
    children: tuple


@dataclass(frozen=True)
class Union:
    children: tuple


Node = Leaf | Intersection | Union

_RANK = {Membership.INSIDE: 0, Membership.BOUNDARY: 1, Membership.OUTSIDE: 2}


def _classify_node(node: Node, x: np.ndarray, tol: float,
                   strict_tol: float) -> Membership:
    if isinstance(node, Leaf):
        v = node.constraint.value_checked(x)
        eff = strict_tol if node.strict else tol
        if eff == 0.0 and node.strict:
            return Membership.INSIDE if v < 0.0 else Membership.OUTSIDE
        if v < -eff:
            return Membership.INSIDE
        if v > eff:
            return Membership.OUTSIDE
        return Membership.BOUNDARY
    if isinstance(node, Intersection):
        worst = Membership.INSIDE
        for child in node.children:
            m = _classify_node(child, x, tol, strict_tol)
            if _RANK[m] > _RANK[worst]:
                worst = m
            if worst == Membership.OUTSIDE:
                return worst
        return worst
    if isinstance(node, Union):
        best = Membership.OUTSIDE
        for child in node.children:
            m = _classify_node(child, x, tol, strict_tol)
            if _RANK[m] < _RANK[best]:
                best = m
            if best == Membership.INSIDE:
                return best
        return best
    raise TypeError(f"not a set node: {node!r}")


def _value_node(node: Node, x: np.ndarray) -> float:
    if isinstance(node, Leaf):
        return node.constraint.value_checked(x)
    if isinstance(node, Intersection):
        return max(_value_node(child, x) for child in node.children)
    if isinstance(node, Union):
        return min(_value_node(child, x) for child in node.children)
    raise TypeError(f"not a set node: {node!r}")


def _closure_node(node: Node) -> Node:
    if isinstance(node, Leaf):
        return replace(node, strict=False) if node.strict else node
    if isinstance(node, Intersection):
        return Intersection(tuple(_closure_node(c) for c in node.children))
    return Union(tuple(_closure_node(c) for c in node.children))


def _dnf_node(node: Node) -> list[tuple[Leaf, ...]]:
    if isinstance(node, Leaf):
        return [(node,)]
    if isinstance(node, Union):
        out: list[tuple[Leaf, ...]] = []
        for child in node.children:
            out.extend(_dnf_node(child))
        return out
    if isinstance(node, Intersection):
        terms: list[tuple[Leaf, ...]] = [()]
        for child in node.children:
            child_terms = _dnf_node(child)
            terms = [t + c for t in terms for c in child_terms]
            if len(terms) > 64:
                raise PreconditionError("set tree DNF exceeds 64 terms")
        return terms
    raise TypeError(f"not a set node: {node!r}")


@dataclass(frozen=True)
class SetDescription:
    """A subset of R^n described by a constraint tree."""

    n: int
    root: Node
    name: str = ""

    def classify(self, x: Sequence[float] | np.ndarray, tol: float,
                 strict_tol: float | None = None) -> Membership:
        """Membership at tolerance `tol`; half-open leaves use `strict_tol`
        instead (0 keeps their strict semantics while `tol` absorbs noise
        on the closed leaves)."""
        if tol < 0:
            raise PreconditionError("tol must be >= 0")
        st = tol if strict_tol is None else strict_tol
        return _classify_node(self.root, np.asarray(x, dtype=float), tol, st)

    def value(self, x: Sequence[float] | np.ndarray) -> float:
        """Signed level proxy by min/max composition (<=0 on the closure)."""
        return _value_node(self.root, np.asarray(x, dtype=float))

    def closure(self) -> "SetDescription":
        return SetDescription(self.n, _closure_node(self.root), self.name)

    def dnf(self) -> list[tuple[Leaf, ...]]:
        return _dnf_node(self.root)

    def leaves(self) -> list[Leaf]:
        out: list[Leaf] = []

        def walk(node: Node) -> None:
            if isinstance(node, Leaf):
                out.append(node)
            else:
                for child in node.children:
                    walk(child)

        walk(self.root)
        return out

    def intersect(self, other: "SetDescription", name: str = "") -> "SetDescription":
        return SetDescription(self.n, Intersection((self.root, other.root)), name)

    def union(self, other: "SetDescription", name: str = "") -> "SetDescription":
        return SetDescription(self.n, Union((self.root, other.root)), name)

    def flat_intersection_leaves(self) -> list[Leaf] | None:
        """Leaves when the tree is a pure intersection (no unions), else None."""

        out: list[Leaf] = []

        def walk(node: Node) -> bool:
            if isinstance(node, Leaf):
                out.append(node)
                return True
            if isinstance(node, Intersection):
                return all(walk(child) for child in node.children)
            return False

        return out if walk(self.root) else None


# ---------------------------------------------------------------------------
# Distance and projection


def _newton_feasibility(leaves: Sequence[Leaf], y: np.ndarray, iters: int = 25) -> np.ndarray:
    """Cheap pre-pass: push the most violated constraint toward feasibility."""
    y = y.copy()
    for _ in range(iters):
        vals = [leaf.constraint.value_checked(y) for leaf in leaves]
        worst = int(np.argmax(vals))
        if vals[worst] <= 0.0:
            return y
        g = gradient(leaves[worst].constraint, y)
        gg = float(g @ g)
        if gg < 1e-18:
            return y
        y = y - (vals[worst] / gg) * g
    return y


def _polish_active(leaves: Sequence[Leaf], y: np.ndarray, feas_tol: float) -> np.ndarray:
    """Restore slightly violated constraints (c in (0, sqrt-ish tol]) to c<=0."""
    for _ in range(4):
        vals = np.array([leaf.constraint.value_checked(y) for leaf in leaves])
        if np.all(vals <= feas_tol * 1e-3):
            break
        worst = int(np.argmax(vals))
        if vals[worst] <= 0:
            break
        g = gradient(leaves[worst].constraint, y)
        gg = float(g @ g)
        if gg < 1e-18:
            break
        y = y - (vals[worst] / gg) * g
    return y


def _project_term(leaves: Sequence[Leaf], z: np.ndarray, starts: list[np.ndarray],
                  feas_tol: float, maxiter: int) -> tuple[np.ndarray, float] | None:
    """Closest point to z on the intersection of leaf sublevel sets, or None."""
    constraints = [
        {
            "type": "ineq",
            "fun": (lambda y, c=leaf.constraint: -c.value_checked(np.asarray(y))),
            "jac": (lambda y, c=leaf.constraint: -gradient(c, np.asarray(y))),
        }
        for leaf in leaves
    ]

    def objective(y: np.ndarray) -> float:
        d = y - z
        return float(d @ d)

    def objective_jac(y: np.ndarray) -> np.ndarray:
        return 2.0 * (y - z)

    best: tuple[np.ndarray, float] | None = None
    stale = 0
    for i, y0 in enumerate(starts):
        try:
            res = minimize(objective, y0, jac=objective_jac, method="SLSQP",
                           constraints=constraints,
                           options={"maxiter": maxiter, "ftol": 1e-16})
        except (EvaluationError, FloatingPointError):
            continue
        y = _polish_active(leaves, np.asarray(res.x, dtype=float), feas_tol)
        vals = [leaf.constraint.value_checked(y) for leaf in leaves]
        if max(vals) > feas_tol:
            continue
        d = float(np.linalg.norm(y - z))
        if best is None or d < best[1] - 1e-12 * (1.0 + best[1]):
            best = (y, d)
            stale = 0
        else:
            stale += 1
            # convex terms settle immediately; stop burning starts once stable
            if stale >= 2 and i >= 2:
                break
    return best


def _term_lower_bound(leaves: Sequence[Leaf], x: np.ndarray) -> float:
    """Linearized distance lower bound max_j c_j(x)/|grad c_j(x)| over violated
    leaves; heuristic for term ordering and pruning (exact for affine leaves)."""
    lb = 0.0
    for leaf in leaves:
        v = leaf.constraint.value_checked(x)
        if v > 0.0:
            g = float(np.linalg.norm(gradient(leaf.constraint, x)))
            lb = max(lb, v / (g + 1e-12))
    return lb


def _project_impl(S: SetDescription, x: np.ndarray, *, starts: int, seed: int,
                  warm: np.ndarray | None, feas_tol: float,
                  maxiter: int) -> tuple[np.ndarray, float]:
    closed = S.closure()
    if closed.classify(x, 0.0) != Membership.OUTSIDE:
        return x.copy(), 0.0
    rng = np.random.default_rng((int(seed), zlib.crc32(b"project")))
    best: tuple[np.ndarray, float] | None = None
    terms = sorted(closed.dnf(), key=lambda lv: _term_lower_bound(lv, x))
    for leaves in terms:
        if best is not None and _term_lower_bound(leaves, x) > 4.0 * best[1] + 1e-12:
            continue  # cannot beat the incumbent (heuristic prune)
        term_starts: list[np.ndarray] = []
        if warm is not None:
            term_starts.append(np.asarray(warm, dtype=float))
        term_starts.append(x.copy())
        term_starts.append(_newton_feasibility(leaves, x))
        scale = 1.0 + float(np.linalg.norm(x))
        while len(term_starts) < max(3, starts):
            radius = scale * float(rng.uniform(0.05, 1.5))
            term_starts.append(x + radius * rng.normal(size=S.n) / np.sqrt(S.n))
        got = _project_term(leaves, x, term_starts, feas_tol, maxiter)
        if got is not None and (best is None or got[1] < best[1]):
            best = got
    if best is None:
        raise NonConvergence(f"no feasible point found for {S.name or 'set'} near {x.tolist()}")
    return best


def project(S: SetDescription, x: Sequence[float] | np.ndarray, *, starts: int = 16,
            seed: int = 0, warm: np.ndarray | None = None, feas_tol: float = 1e-9,
            maxiter: int = 80) -> np.ndarray:
    """A closest point of S (its closure) to x, by multi-start local descent."""
    y, _ = _project_impl(S, np.asarray(x, dtype=float), starts=starts, seed=seed,
                         warm=warm, feas_tol=feas_tol, maxiter=maxiter)
    return y


def feasible_point(S: SetDescription, x: Sequence[float] | np.ndarray, *,
                   seed: int = 0, feas_tol: float = 1e-9) -> np.ndarray | None:
    """A nearby (not necessarily closest) point of S: Newton restoration on the
    most promising DNF term, one local solve as fallback. Cheap enough for
    samplers; use project() when the minimizer itself matters."""
    x = np.asarray(x, dtype=float)
    closed = S.closure()
    if closed.classify(x, 0.0) != Membership.OUTSIDE:
        return x.copy()
    terms = sorted(closed.dnf(), key=lambda lv: _term_lower_bound(lv, x))
    for leaves in terms:
        y = _newton_feasibility(leaves, x, iters=30)
        if max(leaf.constraint.value_checked(y) for leaf in leaves) <= feas_tol:
            return y
    for leaves in terms[:2]:
        got = _project_term(leaves, x, [x.copy(), _newton_feasibility(leaves, x)],
                            feas_tol, 40)
        if got is not None:
            return got[0]
    return None


def distance(S: SetDescription, x: Sequence[float] | np.ndarray, *, starts: int = 16,
             seed: int = 0, warm: np.ndarray | None = None, feas_tol: float = 1e-9,
             maxiter: int = 80) -> float:
    """inf_{y in S} |x-y|, approximated from above by the projection solver."""
    _, d = _project_impl(S, np.asarray(x, dtype=float), starts=starts, seed=seed,
                         warm=warm, feas_tol=feas_tol, maxiter=maxiter)
    return d


def project_with_distance(S: SetDescription, x: Sequence[float] | np.ndarray,
                          **kw) -> tuple[np.ndarray, float]:
    return _project_impl(S, np.asarray(x, dtype=float),
                         starts=kw.pop("starts", 16), seed=kw.pop("seed", 0),
                         warm=kw.pop("warm", None), feas_tol=kw.pop("feas_tol", 1e-9),
                         maxiter=kw.pop("maxiter", 80))


# ---------------------------------------------------------------------------
# Cones


@dataclass(frozen=True)
class ConeQuery:
    """Base point, direction, and the h-sequence for liminf-style cone tests."""

    x: np.ndarray
    v: np.ndarray
    h0: float = 1e-2
    decay: float = 0.5
    count: int = 20
    h_min: float = 1e-6  # distance-solver noise floor; see module docs
    tol: float = 1e-3
    eps_act: float = 1e-6

    def __post_init__(self):
        if not (self.h0 > 0 and 0 < self.decay < 1 and self.count >= 4):
            raise PreconditionError("need h0 > 0, decay in (0,1), count >= 4")
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))

    def h_values(self) -> list[float]:
        hs = [self.h0 * self.decay ** i for i in range(self.count)]
        kept = [h for h in hs if h >= self.h_min]
        return kept if kept else hs[:1]


@dataclass(frozen=True)
class Transversality:
    feasible: bool
    direction: np.ndarray | None
    best: float  # achieved max_i <g_i, v>


def transversality_check(gradients: Sequence[np.ndarray], *, margin: float = 1e-8,
                         starts: int = 8, seed: int = 0) -> Transversality:
    """Find a unit v with <g_i, v> < 0 for all i, or declare infeasibility.

    Solves min t s.t. <g_i, v> <= t, |v|^2 <= 1 by multi-start SLSQP (the
    epigraph form of minimizing the max over the unit sphere). A zero gradient
    makes the condition unsatisfiable.
    """
    gs = [np.asarray(g, dtype=float) for g in gradients]
    if not gs:
        raise PreconditionError("gradient list must be nonempty")
    n = gs[0].size
    for g in gs:
        if float(np.linalg.norm(g)) <= 1e-12:
            return Transversality(False, None, 0.0)
    G = np.array(gs)

    def objective(z: np.ndarray) -> float:
        return z[-1]

    def objective_jac(z: np.ndarray) -> np.ndarray:
        j = np.zeros(n + 1)
        j[-1] = 1.0
        return j

    cons = [
        {
            "type": "ineq",
            "fun": lambda z, gi=g: z[-1] - float(gi @ z[:-1]),
            "jac": lambda z, gi=g: np.concatenate([-gi, [1.0]]),
        }
        for g in G
    ]
    cons.append({
        "type": "ineq",
        "fun": lambda z: 1.0 - float(z[:-1] @ z[:-1]),
        "jac": lambda z: np.concatenate([-2.0 * z[:-1], [0.0]]),
    })

    rng = np.random.default_rng((int(seed), zlib.crc32(b"transversality")))
    seeds: list[np.ndarray] = []
    mean = -np.sum(G / np.linalg.norm(G, axis=1, keepdims=True), axis=0)
    if np.linalg.norm(mean) > 1e-12:
        seeds.append(mean / np.linalg.norm(mean))
    for g in G[:3]:
        seeds.append(-g / np.linalg.norm(g))
    while len(seeds) < starts:
        u = rng.normal(size=n)
        seeds.append(u / np.linalg.norm(u))

    best_v, best_t = None, np.inf
    for v0 in seeds:
        t0 = float(np.max(G @ v0))
        z0 = np.concatenate([v0, [t0]])
        res = minimize(objective, z0, jac=objective_jac, method="SLSQP",
                       constraints=cons, options={"maxiter": 80, "ftol": 1e-14})
        v = np.asarray(res.x[:-1], dtype=float)
        nv = float(np.linalg.norm(v))
        if nv < 1e-12:
            continue
        v = v / nv
        t = float(np.max(G @ v))
        if t < best_t:
            best_t, best_v = t, v
        if best_t < -max(margin, 1e-6) * 10:
            break
    if best_v is None or best_t >= -margin:
        return Transversality(False, None, best_t if np.isfinite(best_t) else 0.0)
    return Transversality(True, best_v, best_t)


def _active_leaves(S: SetDescription, x: np.ndarray,
                   eps_act: float) -> tuple[list[Leaf], bool] | None:
    """(active leaves, any_outside) for pure intersections; None for unions."""
    leaves = S.flat_intersection_leaves()
    if leaves is None:
        return None
    active: list[Leaf] = []
    for leaf in leaves:
        v = leaf.constraint.value_checked(x)
        if v > eps_act:
            return active, True
        if abs(v) <= eps_act:
            active.append(leaf)
    return active, False


def contingent_cone_member_analytic(S: SetDescription, x: Sequence[float] | np.ndarray,
                                    v: Sequence[float] | np.ndarray,
                                    eps_act: float = 1e-6) -> ConeVerdict:
    """Gradient test for T_S(x) on intersections of smooth sublevel leaves.

    Member iff <grad c_j(x), v> <= 0 for every active j; NotApplicable when the
    tree contains unions or the active gradients fail transversality.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    got = _active_leaves(S, x, eps_act)
    if got is None:
        return ConeVerdict.NOT_APPLICABLE
    active, outside = got
    if outside:
        return ConeVerdict.NOT_APPLICABLE
    if not active:
        return ConeVerdict.MEMBER
    grads = [gradient(leaf.constraint, x) for leaf in active]
    if not transversality_check(grads).feasible:
        return ConeVerdict.NOT_APPLICABLE
    for g in grads:
        if float(g @ v) > 0.0:
            return ConeVerdict.NON_MEMBER
    return ConeVerdict.MEMBER


def dm_cone_member(S: SetDescription, x: Sequence[float] | np.ndarray,
                   v: Sequence[float] | np.ndarray, eps_act: float = 1e-6,
                   margin: float = 1e-8) -> ConeVerdict:
    """Gradient test for the interior-directions cone D_int(S)(x).

    Member iff <grad c_j(x), v> < -margin for every active j. Needs nonzero
    active gradients (not joint transversality: opposed nonzero gradients are
    a legitimate NonMember).
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    got = _active_leaves(S, x, eps_act)
    if got is None:
        return ConeVerdict.NOT_APPLICABLE
    active, outside = got
    if outside:
        return ConeVerdict.NOT_APPLICABLE
    if not active:
        return ConeVerdict.MEMBER
    grads = [gradient(leaf.constraint, x) for leaf in active]
    for g in grads:
        if float(np.linalg.norm(g)) <= 1e-12:
            return ConeVerdict.NOT_APPLICABLE
    for g in grads:
        if float(g @ v) >= -margin:
            return ConeVerdict.NON_MEMBER
    return ConeVerdict.MEMBER


def contingent_min_ratio(S: SetDescription, q: ConeQuery, *, seed: int = 0,
                         early_exit: bool = True) -> float:
    """min over the h-sequence of distance(S, x + h v)/h.

    A sampled under-approximation of the liminf in the cone definition;
    membership holds when the value is <= q.tol. Raises NonConvergence if the
    distance solver fails (caller reports Inconclusive).
    """
    if float(np.linalg.norm(q.v)) == 0.0:
        return 0.0
    best = np.inf
    warm: np.ndarray | None = None
    for h in q.h_values():
        y, d = _project_impl(S, q.x + h * q.v, starts=6, seed=seed, warm=warm,
                             feas_tol=1e-9, maxiter=80)
        warm = y
        best = min(best, d / h)
        if early_exit and best <= q.tol:
            return best
    return best


def contingent_cone_member_numeric(S: SetDescription, q: ConeQuery, *,
                                   seed: int = 0) -> bool:
    """True iff the sampled liminf ratio distance(S, x + h v)/h stays <= tol."""
    return contingent_min_ratio(S, q, seed=seed) <= q.tol


def external_min_ratio(S: SetDescription, q: ConeQuery, *, seed: int = 0,
                       early_exit: bool = True) -> float:
    """min over the h-sequence of (dist(S, x+hv) - dist(S, x))/h."""
    y0, d0 = _project_impl(S, q.x, starts=8, seed=seed, warm=None,
                           feas_tol=1e-9, maxiter=80)
    best = np.inf
    warm = y0
    for h in q.h_values():
        y, d = _project_impl(S, q.x + h * q.v, starts=6, seed=seed, warm=warm,
                             feas_tol=1e-9, maxiter=80)
        warm = y
        best = min(best, (d - d0) / h)
        if early_exit and best <= q.tol:
            return best
    return best


def external_cone_member(S: SetDescription, q: ConeQuery, *, seed: int = 0) -> bool:
    """True iff the distance to S does not grow to first order along v."""
    return external_min_ratio(S, q, seed=seed) <= q.tol


# ---------------------------------------------------------------------------
# Minkowski functional (C-sets)


def minkowski(S: SetDescription, x: Sequence[float] | np.ndarray,
              rel_tol: float = 1e-13, max_mu: float = 1e12) -> float:
    """inf { mu >= 0 : x in mu*S } by ray bisection on membership.

    Requires 0 in int(S) (the C-set precondition), checked by membership.
    """
    x = np.asarray(x, dtype=float)
    origin = np.zeros(S.n)
    if S.classify(origin, 0.0) != Membership.INSIDE:
        raise PreconditionError("Minkowski functional needs 0 in int(S)")
    if float(np.linalg.norm(x)) == 0.0:
        return 0.0

    def member(mu: float) -> bool:
        return S.classify(x / mu, 0.0) != Membership.OUTSIDE

    hi = 1.0
    while not member(hi):
        hi *= 2.0
        if hi > max_mu:
            raise NonConvergence("no finite Minkowski scaling found (set unbounded toward x?)")
    lo = hi / 2.0
    while lo > 1e-300 and member(lo):
        lo /= 2.0
    if lo <= 1e-300:
        return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if member(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * hi:
            break
    return hi


# ---------------------------------------------------------------------------
# Sampling


@dataclass(frozen=True)
class SampleResult:
    points: list[np.ndarray]
    requested: int
    achieved: int
    short: bool
    used_projection: bool = False

    def __iter__(self):
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)


def _box_draws(rng: np.random.Generator, box: np.ndarray, count: int) -> np.ndarray:
    lo, hi = box[:, 0], box[:, 1]
    return lo + rng.uniform(size=(count, box.shape[0])) * (hi - lo)


def sample(S: SetDescription, box: Sequence[Sequence[float]] | np.ndarray, n: int,
           seed: int = 0) -> SampleResult:
    """Deterministic points of S inside the box; rejection first, then
    projection of box draws for thin or measure-zero sets."""
    if n <= 0:
        raise PreconditionError("n must be positive")
    box = np.asarray(box, dtype=float)
    rng = np.random.default_rng((int(seed), zlib.crc32(b"sample")))
    points: list[np.ndarray] = []
    budget = max(50 * n, 4000)
    drawn = 0
    while drawn < budget and len(points) < n:
        batch = _box_draws(rng, box, min(512, budget - drawn))
        drawn += len(batch)
        for x in batch:
            if S.classify(x, 0.0) != Membership.OUTSIDE:
                points.append(x)
                if len(points) >= n:
                    break
    used_projection = False
    if len(points) < n:
        lo, hi = box[:, 0], box[:, 1]
        for x in _box_draws(rng, box, 8 * n):
            if len(points) >= n:
                break
            y = feasible_point(S, x, seed=seed)
            if y is None:
                continue
            if np.all(y >= lo - 1e-9) and np.all(y <= hi + 1e-9):
                points.append(y)
                used_projection = True
    return SampleResult(points=points[:n], requested=n, achieved=len(points[:n]),
                        short=len(points) < n, used_projection=used_projection)


def sample_boundary(S: SetDescription, box: Sequence[Sequence[float]] | np.ndarray,
                    n: int, band: float, seed: int = 0) -> SampleResult:
    """Points with membership Boundary at tolerance `band`, found by bisection
    between set points and outside points (plus set points already in band)."""
    if n <= 0 or band <= 0:
        raise PreconditionError("need n > 0 and band > 0")
    box = np.asarray(box, dtype=float)
    rng = np.random.default_rng((int(seed), zlib.crc32(b"boundary")))
    inside = sample(S, box, max(2 * n, 32), seed=seed)
    points: list[np.ndarray] = []
    for x in inside.points:
        if len(points) >= n:
            break
        if S.classify(x, band) == Membership.BOUNDARY:
            points.append(x)
    if len(points) < n and inside.points:
        outside_pool: list[np.ndarray] = []
        drawn = 0
        while drawn < 4000 and len(outside_pool) < max(2 * n, 32):
            batch = _box_draws(rng, box, 256)
            drawn += len(batch)
            for x in batch:
                if S.classify(x, 0.0) == Membership.OUTSIDE:
                    outside_pool.append(x)
                    if len(outside_pool) >= max(2 * n, 32):
                        break
        attempts = 0
        while outside_pool and len(points) < n and attempts < 8 * n:
            attempts += 1
            a = inside.points[int(rng.integers(len(inside.points)))]
            b = outside_pool[int(rng.integers(len(outside_pool)))]
            for _ in range(80):
                mid = 0.5 * (a + b)
                if S.classify(mid, 0.0) == Membership.OUTSIDE:
                    b = mid
                else:
                    a = mid
            if S.classify(a, band) == Membership.BOUNDARY:
                points.append(a)
    return SampleResult(points=points[:n], requested=n, achieved=len(points[:n]),
                        short=len(points) < n, used_projection=inside.used_projection)
