"""Sampling-based checkers for the barrier sufficient conditions.

Every checker returns a Verdict: NoViolationFound is explicitly
sampling-relative (never a proof), Violated carries re-checkable witnesses,
Inconclusive records what prevented a call either way.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np

from . import geometry as geo
from . import regions
from .fields import (Grid, ScalarField, Vertices, clarke_support, gradient,
                     image_samples, filter_by_cone)
from .model import BarrierCandidate, HybridSystem, KComplex, build_k_complex

__all__ = [
    "NO_VIOLATION",
    "VIOLATED",
    "INCONCLUSIVE",
    "CheckConfig",
    "Evaluation",
    "Verdict",
    "UniquenessFunction",
    "check_thm1",
    "check_thm_boundary",
    "check_thm_external",
    "check_thm_lipschitz",
    "check_relaxed",
    "check_invariance_completion",
    "check_contractive_c1",
    "check_contractive_lip",
    "check_contractivity_completion",
    "check_cset",
]

NO_VIOLATION = "no_violation_found"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"

C1 = "c1"
LIPSCHITZ = "lipschitz"

_HULL_VERTEX_CAP = 3  # parameter count above which vertex enumeration is skipped


@dataclass(frozen=True)
class CheckConfig:
    box: tuple  # bounding box [[lo, hi]] * n
    radius: float = 0.1          # realizes the neighborhoods U(.)
    band: float = 0.01           # boundary band delta
    samples: int = 48            # per region
    scheme: object = Grid(5)     # image sampling scheme for F and G
    tol_eq: float = 1e-9         # slack for <= conditions
    margin_strict: float = 1e-6  # required margin for < conditions
    eps_act: float = 1e-6        # active-constraint tolerance
    seed: int = 0
    cone_tol: float = 1e-3
    cone_h0: float = 1e-2
    cone_decay: float = 0.5
    cone_count: int = 20
    cone_hmin: float = 1e-6
    clarke_radius: float = 1e-4
    clarke_count: int = 64
    workers: int = 1
    lipschitz_pairs: str = "projection"  # or "random"

    def __post_init__(self):
        if not (self.radius > self.band > 0):
            raise geo.PreconditionError("need radius > band > 0")
        if self.samples < 1 or self.margin_strict <= 0:
            raise geo.PreconditionError("need samples >= 1 and margin_strict > 0")

    def box_array(self) -> np.ndarray:
        return np.asarray(self.box, dtype=float)

    def cone_query(self, x: np.ndarray, v: np.ndarray) -> geo.ConeQuery:
        return geo.ConeQuery(x=x, v=v, h0=self.cone_h0, decay=self.cone_decay,
                             count=self.cone_count, h_min=self.cone_hmin,
                             tol=self.cone_tol, eps_act=self.eps_act)

    def echo(self) -> dict:
        d = asdict(self)
        d["scheme"] = repr(self.scheme)
        return d


@dataclass(frozen=True)
class Evaluation:
    condition: str
    x: tuple
    value: float
    bound: float
    eta: tuple | None = None
    note: str = ""

    @property
    def margin(self) -> float:
        return self.value - self.bound

    @property
    def violated(self) -> bool:
        return self.value > self.bound


@dataclass
class Verdict:
    check: str
    status: str
    witnesses: list[Evaluation]
    evaluations: list[Evaluation]
    samples_evaluated: int
    worst_margin: float | None
    vacuous: bool
    flags: list[str]
    notes: list[str]
    config: dict

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "status": self.status,
            "witnesses": [asdict(w) for w in self.witnesses],
            "samples_evaluated": self.samples_evaluated,
            "worst_margin": self.worst_margin,
            "vacuous": self.vacuous,
            "flags": self.flags,
            "notes": self.notes,
            "config": self.config,
            "evaluations": [asdict(e) for e in self.evaluations],
        }


class _Collector:
    def __init__(self) -> None:
        self.evaluations: list[Evaluation] = []
        self.flags: list[str] = []
        self.notes: list[str] = []
        self.inconclusive = False

    def add(self, condition: str, x: np.ndarray, value: float, bound: float,
            eta: np.ndarray | None = None, note: str = "") -> None:
        self.evaluations.append(Evaluation(
            condition=condition,
            x=tuple(float(v) for v in np.asarray(x).ravel()),
            value=float(value), bound=float(bound),
            eta=None if eta is None else tuple(float(v) for v in np.asarray(eta).ravel()),
            note=note))

    def flag(self, name: str) -> None:
        if name not in self.flags:
            self.flags.append(name)

    def note(self, text: str) -> None:
        self.notes.append(text)

    def mark_inconclusive(self, why: str) -> None:
        self.inconclusive = True
        self.note(why)

    def merge(self, other: "_Collector") -> None:
        self.evaluations.extend(other.evaluations)
        for f in other.flags:
            self.flag(f)
        self.notes.extend(other.notes)
        self.inconclusive = self.inconclusive or other.inconclusive

    def finish(self, check: str, cfg: CheckConfig) -> Verdict:
        witnesses = sorted(
            (e for e in self.evaluations if e.violated),
            key=lambda e: (e.condition, float(np.linalg.norm(e.x)), e.x))
        vacuous = not self.evaluations
        if witnesses:
            status = VIOLATED
        elif self.inconclusive:
            status = INCONCLUSIVE
        else:
            status = NO_VIOLATION
        if vacuous and status == NO_VIOLATION:
            self.flag("vacuous")
        self.flag("sampling-relative")
        worst = max((e.margin for e in self.evaluations), default=None)
        return Verdict(check=check, status=status, witnesses=witnesses,
                       evaluations=list(self.evaluations),
                       samples_evaluated=len(self.evaluations),
                       worst_margin=worst, vacuous=vacuous and status == NO_VIOLATION,
                       flags=list(self.flags), notes=list(self.notes),
                       config=cfg.echo())


# ---------------------------------------------------------------------------
# Uniqueness functions


@dataclass(frozen=True)
class UniquenessFunction:
    kind: str  # linear | osgood | custom
    k: float = 1.0
    custom: ScalarField | None = None

    def __post_init__(self):
        if self.kind == "linear" and not self.k > 0:
            raise geo.PreconditionError("linear uniqueness function needs k > 0")
        if self.kind == "custom" and self.custom is None:
            raise geo.PreconditionError("custom uniqueness function needs a field")

    def __call__(self, w: float) -> float:
        if self.kind == "linear":
            return self.k * w
        if self.kind == "osgood":
            return w * math.log(w) if w > 0.0 else 0.0
        return float(self.custom.fn(np.array([w])))

    def label(self) -> str:
        if self.kind == "linear":
            return f"linear:{self.k}"
        return self.kind

    @staticmethod
    def parse(text: str) -> "UniquenessFunction":
        if text == "osgood":
            return UniquenessFunction("osgood")
        if text.startswith("linear"):
            k = float(text.split(":", 1)[1]) if ":" in text else 1.0
            return UniquenessFunction("linear", k=k)
        raise geo.PreconditionError(f"unknown uniqueness function {text!r}")


# ---------------------------------------------------------------------------
# Shared pieces


def _run_tasks(tasks: list[Callable[[], "_Collector"]], col: "_Collector",
               workers: int) -> None:
    """Run independent collector-producing tasks and merge them in task order,
    so the verdict is identical for any worker count."""
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda fn: fn(), tasks))
    else:
        parts = [fn() for fn in tasks]
    for part in parts:
        col.merge(part)


def _require_c1(B: BarrierCandidate) -> None:
    if not B.all_c1():
        raise geo.PreconditionError("this check needs every barrier component tagged C1")


def _filtered_images(H: HybridSystem, x: np.ndarray, cfg: CheckConfig,
                     col: _Collector) -> list[np.ndarray]:
    etas = image_samples(H.F, x, cfg.scheme)
    try:
        return filter_by_cone(etas, H.C, x, eps_act=cfg.eps_act,
                              cone_tol=cfg.cone_tol)
    except geo.NonConvergence:
        col.mark_inconclusive(f"T_C filter did not converge at {x.tolist()}")
        col.flag("distance-approximate")
        return []


def _jump_legs(col: _Collector, kc: KComplex, H: HybridSystem, cfg: CheckConfig,
               *, strict: bool, prefix: str, interior_on_boundary: bool = False) -> None:
    """B(G(x)) <= 0 (or < 0) and sampled containment G(x) in C u D (or its
    interior from dK cap D when interior_on_boundary)."""
    box = cfg.box_array()
    pts = regions.jump_region(kc, H, box, cfg.samples, seed=cfg.seed)
    bound_b = -cfg.margin_strict if strict else cfg.tol_eq
    for x in pts:
        gs = image_samples(H.G, x, cfg.scheme)
        for g in gs:
            val = float(np.max(kc.barrier.values(g)))
            col.add(f"{prefix}:jump:barrier", x, val, bound_b, eta=g)
            col.add(f"{prefix}:jump:in-cud", x, float(kc.CuD.value(g)), cfg.tol_eq, eta=g)
    if interior_on_boundary:
        bpts = regions.boundary_jump_region(kc, H, box, cfg.samples, cfg.band,
                                            seed=cfg.seed)
        for x in bpts:
            gs = image_samples(H.G, x, cfg.scheme)
            for g in gs:
                col.add(f"{prefix}:jump:interior", x, float(kc.CuD.value(g)),
                        -cfg.margin_strict, eta=g)
    col.flag("sampled-containment")


def _tangent_ratio(S: geo.SetDescription, x: np.ndarray, eta: np.ndarray,
                   cfg: CheckConfig, col: _Collector) -> float | None:
    """0.0 for an analytic member, a measured liminf ratio otherwise;
    None when the distance solver fails (marked inconclusive).

    An analytic NonMember is re-confirmed numerically: at sampled points the
    active-constraint tolerance can attribute a boundary cone to a point that
    is actually interior.
    """
    verdict = geo.contingent_cone_member_analytic(S, x, eta, eps_act=cfg.eps_act)
    if verdict == geo.ConeVerdict.MEMBER:
        return 0.0
    try:
        col.flag("distance-approximate")
        return geo.contingent_min_ratio(S, cfg.cone_query(x, eta), seed=cfg.seed)
    except geo.NonConvergence:
        col.mark_inconclusive(f"tangent-cone distance solve failed at {x.tolist()}")
        return None


# ---------------------------------------------------------------------------
# Theorem checks


def check_thm1(H: HybridSystem, B: BarrierCandidate, cfg: CheckConfig) -> Verdict:
    """Flow: <grad B_i, eta> <= 0 on (U(M_i) \\ K_ei) cap C for eta in F cap T_C.
    Jump: B(G(x)) <= 0 and G(x) in C u D on D cap K."""
    _require_c1(B)
    kc = build_k_complex(H, B)
    col = _Collector()
    box = cfg.box_array()

    def flow_leg(i: int) -> _Collector:
        part = _Collector()
        pts = regions.m_band(kc, H, i, box, cfg.samples, cfg.radius, cfg.band,
                             seed=cfg.seed)
        for x in pts:
            for eta in _filtered_images(H, x, cfg, part):
                val = float(gradient(B.components[i], x) @ eta)
                part.add(f"thm1:flow:B{i + 1}", x, val, cfg.tol_eq, eta=eta)
        return part

    _run_tasks([lambda i=i: flow_leg(i) for i in range(B.m)], col, cfg.workers)
    _jump_legs(col, kc, H, cfg, strict=False, prefix="thm1")
    return col.finish("thm1", cfg)


def check_thm_boundary(H: HybridSystem, B: BarrierCandidate, cfg: CheckConfig,
                       rho: UniquenessFunction, option: str = "a") -> Verdict:
    """Boundary-only flow condition under a Lipschitz-like estimate with a
    uniqueness function, transversality, and one of the corner options a/b/c."""
    _require_c1(B)
    if option not in ("a", "b", "c"):
        raise geo.PreconditionError("option must be one of a, b, c")
    kc = build_k_complex(H, B)
    col = _Collector()
    col.note(f"uniqueness function {rho.label()}")
    if rho.kind == "custom":
        col.flag("custom-uniqueness-function")
    box = cfg.box_array()

    # (1) <grad B_i, eta> <= 0 on M_i cap C for ALL eta in F(x)
    for i in range(B.m):
        for x in regions.m_on_c(kc, H, i, box, cfg.samples, cfg.band,
                                seed=cfg.seed):
            for eta in image_samples(H.F, x, cfg.scheme):
                val = float(gradient(B.components[i], x) @ eta)
                col.add(f"boundary:eq9:B{i + 1}", x, val, cfg.tol_eq, eta=eta)

    # (2) transversality of active barrier gradients on dK_e cap C
    for x in regions.ke_boundary_in_c(kc, H, box, cfg.samples, cfg.band,
                                      seed=cfg.seed):
        active = [i for i in range(B.m)
                  if abs(float(B.components[i].fn(x))) <= max(cfg.eps_act, cfg.band)]
        if not active:
            continue
        grads = [gradient(B.components[i], x) for i in active]
        tv = geo.transversality_check(grads, margin=cfg.margin_strict, seed=cfg.seed)
        col.add("boundary:transversality", x, tv.best, -cfg.margin_strict,
                note="infeasible" if not tv.feasible else "")

    # (3) Lipschitz-like estimate (x paired with its projection on d(K cap C))
    kc_c = regions.kc_set(kc, H)
    band_pts = regions.outside_band(kc, H, box, cfg.samples, cfg.radius, cfg.band,
                                    seed=cfg.seed)
    pair_targets: list[tuple[np.ndarray, np.ndarray]] = []
    if cfg.lipschitz_pairs == "random":
        ys = geo.sample_boundary(kc_c, box, cfg.samples, cfg.band,
                                 seed=cfg.seed).points
        rng = regions.rng_for(cfg.seed, "pairs")
        for x in band_pts:
            if ys:
                pair_targets.append((x, ys[int(rng.integers(len(ys)))]))
    for x in band_pts:
        try:
            y = geo.project(kc_c, x, starts=8, seed=cfg.seed)
        except geo.NonConvergence:
            col.mark_inconclusive(f"projection onto d(K cap C) failed at {x.tolist()}")
            continue
        pair_targets.append((x, y))
    for x, y in pair_targets:
        dxy = float(np.linalg.norm(x - y))
        if dxy < 1e-12:
            continue
        sx = [float((x - y) @ ex) for ex in image_samples(H.F, x, cfg.scheme)]
        sy = [float((x - y) @ ey) for ey in image_samples(H.F, y, cfg.scheme)]
        bound = dxy * abs(rho(dxy)) + cfg.tol_eq
        for s in sx:
            residual = min(abs(s - t) for t in sy)
            col.add("boundary:lipschitz-estimate", x, residual, bound)

    # (4) the chosen corner option
    if option == "a":
        for x in regions.region_a(kc, H, box, cfg.samples, cfg.radius, cfg.band,
                                  seed=cfg.seed):
            active = [i for i in range(B.m)
                      if abs(float(B.components[i].fn(x))) <= max(cfg.eps_act, cfg.band)]
            if not active:
                continue
            grads = [gradient(B.components[i], x) for i in active]
            tv = geo.transversality_check(grads, margin=cfg.margin_strict, seed=cfg.seed)
            col.add("boundary:a:transversality", x, tv.best, -cfg.margin_strict)
            for eta in image_samples(H.F, x, cfg.scheme):
                for i in active:
                    val = float(gradient(B.components[i], x) @ eta)
                    col.add(f"boundary:a:flow:B{i + 1}", x, val, cfg.tol_eq, eta=eta)
    elif option == "b":
        for x in regions.region_b(kc, H, box, cfg.samples, cfg.radius, cfg.band,
                                  seed=cfg.seed):
            for eta in image_samples(H.F, x, cfg.scheme):
                ratio = _tangent_ratio(kc_c, x, eta, cfg, col)
                if ratio is None:
                    continue
                col.add("boundary:b:eqraj2", x, min(ratio, 1e6), cfg.cone_tol, eta=eta)
    else:
        convex_ok = True
        c_pts = geo.sample(H.C, box, 2 * cfg.samples, seed=cfg.seed).points[:40]
        for ai in range(len(c_pts)):
            for bi in range(ai + 1, len(c_pts)):
                mid = 0.5 * (c_pts[ai] + c_pts[bi])
                if H.C.classify(mid, 1e-9) == geo.Membership.OUTSIDE:
                    col.mark_inconclusive(
                        f"the set C is not convex: midpoint {mid.tolist()} of "
                        f"sampled points is outside C")
                    convex_ok = False
                    break
            if not convex_ok:
                break
        if convex_ok:
            for x in regions.anchors_ke_dc(kc, H, box, cfg.samples, cfg.band,
                                           seed=cfg.seed):
                for eta in image_samples(H.F, x, cfg.scheme):
                    ratio = _tangent_ratio(kc_c, x, eta, cfg, col)
                    if ratio is None:
                        continue
                    col.add("boundary:c:eqraj2", x, min(ratio, 1e6), cfg.cone_tol, eta=eta)

    _jump_legs(col, kc, H, cfg, strict=False, prefix="boundary")
    return col.finish(f"boundary:{option}", cfg)


def check_thm_external(H: HybridSystem, B: BarrierCandidate, cfg: CheckConfig) -> Verdict:
    """eta in E_K(x) for filtered flow directions on (U(dK) \\ K) cap C."""
    kc = build_k_complex(H, B)
    col = _Collector()
    box = cfg.box_array()
    col.flag("distance-approximate")
    for x in regions.outside_band(kc, H, box, cfg.samples, cfg.radius, cfg.band,
                                  seed=cfg.seed):
        for eta in _filtered_images(H, x, cfg, col):
            try:
                rate = geo.external_min_ratio(kc.K, cfg.cone_query(x, eta), seed=cfg.seed)
            except geo.NonConvergence:
                col.mark_inconclusive(f"external-cone distance solve failed at {x.tolist()}")
                continue
            col.add("external:flow", x, rate, cfg.cone_tol, eta=eta)
    _jump_legs(col, kc, H, cfg, strict=False, prefix="external")
    return col.finish("external", cfg)


def check_thm_lipschitz(H: HybridSystem, B: BarrierCandidate, cfg: CheckConfig) -> Verdict:
    """Clarke support condition max_{zeta} <zeta, eta> <= 0 on the outside band
    (B auto-scalarized via the max when it has several components)."""
    kc = build_k_complex(H, B)
    bar = kc.bar
    col = _Collector()
    if B.m > 1:
        col.note("vector candidate scalarized as max_i B_i")
    box = cfg.box_array()
    for x in regions.outside_band(kc, H, box, cfg.samples, cfg.radius, cfg.band,
                                  seed=cfg.seed):
        for eta in _filtered_images(H, x, cfg, col):
            val = clarke_support(bar, x, eta, radius=cfg.clarke_radius,
                                 count=cfg.clarke_count, seed=cfg.seed)
            col.add("lipschitz:flow", x, val, cfg.tol_eq, eta=eta)
    col.flag("clarke-sampled")
    _jump_legs(col, kc, H, cfg, strict=False, prefix="lipschitz")
    return col.finish("lipschitz", cfg)


def check_relaxed(H: HybridSystem, B: BarrierCandidate, cfg: CheckConfig,
                  rho: UniquenessFunction) -> Verdict:
    """Same bands as check_thm1 with right-hand side rho(B_i(x)) instead of 0."""
    kc = build_k_complex(H, B)
    col = _Collector()
    col.note(f"uniqueness function {rho.label()}")
    if rho.kind == "custom":
        col.flag("custom-uniqueness-function")
    box = cfg.box_array()
    if B.all_c1():
        for i in range(B.m):
            pts = regions.m_band(kc, H, i, box, cfg.samples, cfg.radius, cfg.band,
                                 seed=cfg.seed)
            for x in pts:
                rhs = rho(float(B.components[i].fn(x)))
                for eta in _filtered_images(H, x, cfg, col):
                    val = float(gradient(B.components[i], x) @ eta)
                    col.add(f"relaxed:flow:B{i + 1}", x, val - rhs, cfg.tol_eq, eta=eta,
                            note=f"rho(B_i)={rhs:.6g}")
    elif B.m == 1:
        bar = kc.bar
        for x in regions.outside_band(kc, H, box, cfg.samples, cfg.radius, cfg.band,
                                      seed=cfg.seed):
            rhs = rho(float(bar.fn(x)))
            for eta in _filtered_images(H, x, cfg, col):
                val = clarke_support(bar, x, eta, radius=cfg.clarke_radius,
                                     count=cfg.clarke_count, seed=cfg.seed)
                col.add("relaxed:flow-lipschitz", x, val - rhs, cfg.tol_eq, eta=eta)
        col.flag("clarke-sampled")
    else:
        raise geo.PreconditionError(
            "relaxed check needs C1 components or a scalar Lipschitz candidate")
    _jump_legs(col, kc, H, cfg, strict=False, prefix="relaxed")
    return col.finish("relaxed", cfg)


def _no_finite_escape_note(kc: KComplex, H: HybridSystem, cfg: CheckConfig,
                           col: _Collector) -> None:
    """Heuristic assumption flag, not a proof: K cap C bounded inside the box,
    or |F| bounded on its samples."""
    box = cfg.box_array()
    pts = regions.ke_c_volume(kc, H, box, cfg.samples, seed=cfg.seed)
    if not pts:
        col.note("no-finite-escape heuristic: K cap C produced no samples")
        return
    center = 0.5 * (box[:, 0] + box[:, 1])
    half = 0.5 * (box[:, 1] - box[:, 0])
    inside = all(bool(np.all(np.abs(x - center) <= 0.98 * half)) for x in pts)
    sup_f = 0.0
    for x in pts:
        for eta in image_samples(H.F, x, cfg.scheme):
            sup_f = max(sup_f, float(np.linalg.norm(eta)))
    if inside:
        col.flag("assumed-no-finite-escape")
        col.note("no-finite-escape heuristic: sampled K cap C stays inside the box "
                 f"(sup |F| over samples = {sup_f:.6g})")
    elif np.isfinite(sup_f):
        col.flag("assumed-no-finite-escape")
        col.note(f"no-finite-escape heuristic: sampled sup |F| = {sup_f:.6g} is finite "
                 "although K cap C touches the box")
    else:
        col.note("no-finite-escape heuristic: unverified")


_SHRINK_LEVELS = 7  # radii r * 4^-k, k = 0..6


def _persistent_neighborhood_failures(
        kc: KComplex, H: HybridSystem, cfg: CheckConfig, col: _Collector,
        x_o: np.ndarray, condition: str,
        fail_value: Callable[[np.ndarray], float | None]) -> None:
    """The neighborhood quantifier is existential (some U(x_o) must work), so
    a nearby failure only refutes it if failures persist as the radius
    shrinks toward x_o."""
    worst_at_level: list[tuple[float, np.ndarray] | None] = []
    for k in range(_SHRINK_LEVELS):
        radius = cfg.radius * 0.25 ** k
        pts = regions.neighborhood_on_kdc(kc, H, x_o, cfg.box_array(), radius, 4,
                                          cfg.band, seed=cfg.seed + 7 * k)
        level_worst: tuple[float, np.ndarray] | None = None
        for p in pts:
            val = fail_value(p)
            if val is not None and val > cfg.cone_tol:
                if level_worst is None or val > level_worst[0]:
                    level_worst = (val, p)
        worst_at_level.append(level_worst)
    if all(w is not None for w in worst_at_level):
        val, p = worst_at_level[-1]  # smallest radius
        col.add(condition, p, val, cfg.cone_tol,
                note=f"persists across shrinking neighborhoods of {x_o.tolist()}")
    elif any(w is not None for w in worst_at_level):
        col.note(f"{condition}: transient neighborhood failures near "
                 f"{x_o.tolist()} vanish under shrinking radii (sensitivity only)")


def check_invariance_completion(H: HybridSystem, B: BarrierCandidate,
                                cfg: CheckConfig, mode: str = "prop2") -> Verdict:
    """Pre-invariance to invariance: nontrivial-flow existence on
    (K cap dC) \\ D (prop2) or the cone nonemptiness condition on shrinking
    neighborhoods (prop3), plus the no-finite-escape heuristic flag."""
    if mode not in ("prop2", "prop3"):
        raise geo.PreconditionError("mode must be prop2 or prop3")
    kc = build_k_complex(H, B)
    col = _Collector()
    box = cfg.box_array()
    kc_c = regions.kc_set(kc, H)
    _no_finite_escape_note(kc, H, cfg, col)

    def min_tangent_ratio(p: np.ndarray) -> float | None:
        best: float | None = None
        for eta in image_samples(H.F, p, cfg.scheme):
            r = _tangent_ratio(kc_c, p, eta, cfg, col)
            if r is None:
                continue
            best = r if best is None else min(best, r)
            if best <= cfg.cone_tol:
                return best
        return best

    pts = regions.kdc_not_d(kc, H, box, cfg.samples, cfg.band, seed=cfg.seed)
    for x_o in pts:
        best = min_tangent_ratio(x_o)
        if best is None:
            col.mark_inconclusive(f"no usable flow directions at {x_o.tolist()}")
            continue
        cond = f"invariance:{mode}:flow-exists"
        col.add(cond, x_o, min(best, 1e6), cfg.cone_tol)
        if mode == "prop3":
            _persistent_neighborhood_failures(
                kc, H, cfg, col, x_o, "invariance:prop3:neighborhood",
                lambda p: (lambda r: None if r is None else min(r, 1e6))(min_tangent_ratio(p)))
    if not pts:
        col.note("(K cap dC) \\ D produced no samples; completion is vacuous")
    return col.finish(f"invariance:{mode}", cfg)


def _active_equality_gradients(kc: KComplex, H: HybridSystem, x: np.ndarray,
                               cfg: CheckConfig) -> list[np.ndarray]:
    """Gradients of all constraints active at x among C leaves and barrier
    components (the active-constraint description of dC cap dK)."""
    grads: list[np.ndarray] = []
    eps = max(cfg.eps_act, cfg.band)
    for leaf in H.C.leaves():
        if abs(float(leaf.constraint.value_checked(x))) <= eps:
            grads.append(gradient(leaf.constraint, x))
    for comp in kc.barrier.components:
        if abs(float(comp.fn(x))) <= eps:
            grads.append(gradient(comp, x))
    return grads


def _with_hull_edges(etas: list[np.ndarray]) -> list[np.ndarray]:
    """Augment image samples with pairwise midpoints (members of the convex
    hull, hence of convex images) to reduce emptiness-test misses."""
    if len(etas) < 2 or len(etas) > 12:
        return etas
    out = list(etas)
    for i in range(len(etas)):
        for j in range(i + 1, len(etas)):
            out.append(0.5 * (etas[i] + etas[j]))
    return out


def _corner_emptiness_leg(col: _Collector, kc: KComplex, H: HybridSystem,
                          cfg: CheckConfig, prefix: str) -> None:
    """F(x) cap T_{dC cap dK}(x) must be empty on dK cap dC."""
    box = cfg.box_array()
    eps = max(cfg.eps_act, cfg.band)
    for x in regions.dk_dc(kc, H, box, cfg.samples, cfg.band, seed=cfg.seed):
        grads = _active_equality_gradients(kc, H, x, cfg)
        for eta in _with_hull_edges(image_samples(H.F, x, Vertices())
                                    if H.F.k <= _HULL_VERTEX_CAP
                                    else image_samples(H.F, x, cfg.scheme)):
            if grads and any(abs(float(g @ eta)) > cfg.margin_strict for g in grads):
                continue  # eta transversal to some active level set: not tangent
            # confirm numerically against the equality description
            eq_leaves: list[geo.Leaf] = []
            for leaf in H.C.leaves():
                if abs(float(leaf.constraint.value_checked(x))) <= eps:
                    c = leaf.constraint
                    eq_leaves.append(geo.Leaf(c))
                    eq_leaves.append(geo.Leaf(ScalarField(
                        c.n, (lambda y, _c=c: -float(_c.fn(y))),
                        grad=(lambda y, _c=c: -gradient(_c, y)), name=f"-{c.name}")))
            for comp in kc.barrier.components:
                if abs(float(comp.fn(x))) <= eps:
                    eq_leaves.append(geo.Leaf(comp))
                    eq_leaves.append(geo.Leaf(ScalarField(
                        comp.n, (lambda y, _c=comp: -float(_c.fn(y))),
                        grad=(lambda y, _c=comp: -gradient(_c, y)), name=f"-{comp.name}")))
            if not eq_leaves:
                continue
            eq_set = geo.SetDescription(kc.n, geo.Intersection(tuple(eq_leaves)),
                                        name="dC_cap_dK")
            try:
                ratio = geo.contingent_min_ratio(eq_set, cfg.cone_query(x, eta),
                                                 seed=cfg.seed)
            except geo.NonConvergence:
                col.mark_inconclusive(f"corner tangency solve failed at {x.tolist()}")
                continue
            # violation when eta is tangent to the corner set (ratio small)
            col.add(f"{prefix}:corner-empty", x, -min(ratio, 1e6), -cfg.cone_tol, eta=eta)


def check_contractive_c1(H: HybridSystem, B: BarrierCandidate,
                         cfg: CheckConfig) -> Verdict:
    """Strict flow inequality on M_i cap C, corner-tangency emptiness on
    dK cap dC, and strict jump conditions with interior containment."""
    _require_c1(B)
    kc = build_k_complex(H, B)
    col = _Collector()
    box = cfg.box_array()
    for i in range(B.m):
        for x in regions.m_on_c(kc, H, i, box, cfg.samples, cfg.band,
                                seed=cfg.seed):
            for eta in _filtered_images(H, x, cfg, col):
                val = float(gradient(B.components[i], x) @ eta)
                col.add(f"contract:flow:B{i + 1}", x, val, -cfg.margin_strict, eta=eta)
    _corner_emptiness_leg(col, kc, H, cfg, prefix="contract")
    _jump_legs(col, kc, H, cfg, strict=True, prefix="contract",
               interior_on_boundary=True)
    return col.finish("contract-c1", cfg)


def check_contractive_lip(H: HybridSystem, B: BarrierCandidate,
                          cfg: CheckConfig) -> Verdict:
    """Strict Clarke support condition sampled over all of K_e cap C (a larger
    region than the smooth checker's boundary-only one), plus corner and
    strict jump legs.

    The sampled support under-approximates the true one, so satisfaction
    subtracts a 2*clarke_radius safety margin.
    """
    kc = build_k_complex(H, B)
    bar = kc.bar
    col = _Collector()
    if B.m > 1:
        col.note("vector candidate scalarized as max_i B_i")
    box = cfg.box_array()
    pts = regions.ke_c_volume(kc, H, box, cfg.samples, seed=cfg.seed)
    pts += regions.ke_boundary_in_c(kc, H, box, cfg.samples, cfg.band,
                                    seed=cfg.seed)
    bound = -(cfg.margin_strict + 2.0 * cfg.clarke_radius)
    for x in pts:
        for eta in _filtered_images(H, x, cfg, col):
            val = clarke_support(bar, x, eta, radius=cfg.clarke_radius,
                                 count=cfg.clarke_count, seed=cfg.seed)
            col.add("contract-lip:flow", x, val, bound, eta=eta)
    col.flag("clarke-sampled")
    _corner_emptiness_leg(col, kc, H, cfg, prefix="contract-lip")
    _jump_legs(col, kc, H, cfg, strict=True, prefix="contract-lip",
               interior_on_boundary=True)
    return col.finish("contract-lip", cfg)


def check_contractivity_completion(H: HybridSystem, B: BarrierCandidate,
                                   cfg: CheckConfig) -> Verdict:
    """Pre-contractivity to contractivity: sampled F cap T_C nonempty around
    (K cap dC) \\ D, plus the no-finite-escape heuristic flag."""
    kc = build_k_complex(H, B)
    col = _Collector()
    box = cfg.box_array()
    _no_finite_escape_note(kc, H, cfg, col)

    def min_tc_ratio(p: np.ndarray) -> float | None:
        best: float | None = None
        for eta in image_samples(H.F, p, cfg.scheme):
            r = _tangent_ratio(H.C, p, eta, cfg, col)
            if r is None:
                continue
            best = r if best is None else min(best, r)
            if best <= cfg.cone_tol:
                return best
        return best

    pts = regions.kdc_not_d(kc, H, box, cfg.samples, cfg.band, seed=cfg.seed)
    for x_o in pts:
        best = min_tc_ratio(x_o)
        if best is None:
            col.mark_inconclusive(f"no usable flow directions at {x_o.tolist()}")
            continue
        col.add("contract-complete:flow-in-tc", x_o, min(best, 1e6), cfg.cone_tol)
        _persistent_neighborhood_failures(
            kc, H, cfg, col, x_o, "contract-complete:neighborhood",
            lambda p: (lambda r: None if r is None else min(r, 1e6))(min_tc_ratio(p)))
    if not pts:
        col.note("(K cap dC) \\ D produced no samples; completion is vacuous")
    return col.finish("contract-complete", cfg)


def _cset_spot_checks(kc: KComplex, H: HybridSystem, cfg: CheckConfig,
                      col: _Collector) -> bool:
    box = cfg.box_array()
    origin = np.zeros(kc.n)
    if kc.K.classify(origin, 0.0) != geo.Membership.INSIDE:
        col.mark_inconclusive("C-set precondition fails: 0 not in int(K)")
        return False
    pts = kc.sample_k(box, 2 * cfg.samples, seed=cfg.seed).points
    if not pts:
        col.mark_inconclusive("C-set precondition: K produced no samples")
        return False
    rng = regions.rng_for(cfg.seed, "cset-convexity")
    for _ in range(cfg.samples):
        a = pts[int(rng.integers(len(pts)))]
        b = pts[int(rng.integers(len(pts)))]
        mid = 0.5 * (a + b)
        if kc.K.classify(mid, 1e-9) == geo.Membership.OUTSIDE:
            col.mark_inconclusive(f"C-set precondition fails: K not convex at "
                                  f"midpoint {mid.tolist()}")
            return False
    center = 0.5 * (box[:, 0] + box[:, 1])
    half = 0.5 * (box[:, 1] - box[:, 0])
    if not all(bool(np.all(np.abs(x - center) <= 0.98 * half)) for x in pts):
        col.note("compactness heuristic: K samples touch the bounding box")
    return True


_CSET_H_FLOOR = 1e-4  # quotient noise guard for Minkowski/limsup estimates


def check_cset(H: HybridSystem, B: BarrierCandidate | None, cfg: CheckConfig,
               direction: str = "minkowski") -> Verdict:
    """C-set contractivity via the Minkowski-functional rate (definition) or
    the one-sided barrier difference quotients (sufficient condition)."""
    if direction not in ("minkowski", "barrier"):
        raise geo.PreconditionError("direction must be minkowski or barrier")
    if B is None:
        if direction == "barrier":
            raise geo.PreconditionError("barrier direction needs a barrier candidate")
        B = BarrierCandidate((ScalarField(H.n, lambda x: -1.0,
                                          grad=lambda x: np.zeros(H.n), name="-1"),))
    kc = build_k_complex(H, B)
    col = _Collector()
    box = cfg.box_array()
    if not _cset_spot_checks(kc, H, cfg, col):
        return col.finish(f"cset:{direction}", cfg)

    hs = [h for h in (cfg.cone_h0 * cfg.cone_decay ** i for i in range(cfg.cone_count))
          if h >= _CSET_H_FLOOR]

    if direction == "minkowski":
        for x in regions.boundary_k_in_c(kc, H, box, cfg.samples, cfg.band,
                                         seed=cfg.seed):
            psi_x = geo.minkowski(kc.K, x)
            if abs(psi_x - 1.0) > 1e-6:
                continue  # not boundary-accurate enough for the rate quotient
            for eta in _filtered_images(H, x, cfg, col):
                rate = min((geo.minkowski(kc.K, x + h * eta) - 1.0) / h for h in hs)
                col.add("cset:mink:flow", x, rate, -cfg.margin_strict, eta=eta)
        for x in regions.jump_region(kc, H, box, cfg.samples, seed=cfg.seed):
            for g in image_samples(H.G, x, cfg.scheme):
                col.add("cset:mink:jump", x, geo.minkowski(kc.K, np.asarray(g)),
                        1.0 - cfg.margin_strict, eta=g)
    else:
        for i in range(B.m):
            b_i = B.components[i]
            for x in regions.m_on_c(kc, H, i, box, cfg.samples, cfg.band,
                                    seed=cfg.seed):
                bx = float(b_i.fn(x))
                for eta in _filtered_images(H, x, cfg, col):
                    rate = min((float(b_i.fn(x + h * eta)) - bx) / h for h in hs)
                    col.add(f"cset:barrier:flow:B{i + 1}", x, rate,
                            -cfg.margin_strict, eta=eta)
        for x in regions.jump_region(kc, H, box, cfg.samples, seed=cfg.seed):
            for g in image_samples(H.G, x, cfg.scheme):
                col.add("cset:barrier:jump", x, float(np.max(B.values(g))),
                        -cfg.margin_strict, eta=g)
                col.add("cset:barrier:jump-in-cud", x, float(kc.CuD.value(g)),
                        cfg.tol_eq, eta=g)
        col.flag("sampled-containment")
    return col.finish(f"cset:{direction}", cfg)
