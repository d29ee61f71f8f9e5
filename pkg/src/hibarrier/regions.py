"""Deterministic samplers for the state-space regions quantified over by the
sufficient conditions (boundary bands, level-set pieces, corner sets).

Point pools for a given (set, box, seed) are cached on the KComplex so the
checkers share them across legs; per-region randomness comes from tagged
substreams of the same seed.
"""

from __future__ import annotations

import zlib
import numpy as np
from scipy.optimize import minimize

from . import geometry as geo
from .fields import EvaluationError, gradient
from .model import HybridSystem, KComplex

__all__ = [
    "rng_for",
    "m_on_c",
    "m_band",
    "outside_band",
    "ke_boundary_in_c",
    "anchors_ke_dc",
    "region_a",
    "region_b",
    "dk_dc",
    "jump_region",
    "boundary_jump_region",
    "kdc_not_d",
    "neighborhood_on_kdc",
    "ke_c_volume",
    "boundary_k_in_c",
    "kc_set",
]

_IN_C_TOL = 1e-6  # membership slack when filtering "x in C" after refinement


def rng_for(seed: int, tag: str) -> np.random.Generator:
    return np.random.default_rng((int(seed), zlib.crc32(tag.encode())))


def _ball(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    u = rng.normal(size=n)
    nu = float(np.linalg.norm(u))
    if nu == 0.0:
        u[0] = 1.0
        nu = 1.0
    return (radius * float(rng.uniform()) ** (1.0 / n)) * u / nu


def _in_box(x: np.ndarray, box: np.ndarray, slack: float = 1e-9) -> bool:
    return bool(np.all(x >= box[:, 0] - slack) and np.all(x <= box[:, 1] + slack))


def kc_set(kc: KComplex, H: HybridSystem) -> geo.SetDescription:
    """K intersect C, simplified to K_e intersect C (C is inside C u D)."""
    return geo.SetDescription(kc.n, geo.Intersection((kc.K_e.root, H.C.root)), name="KcapC")


# -- shared pools ------------------------------------------------------------


def _bk_pool(kc: KComplex, box: np.ndarray, n: int, band: float, seed: int) -> list[np.ndarray]:
    return list(kc.sample_boundary_k(box, max(4 * n, 32), band, seed=seed).points)


def _k_pool(kc: KComplex, box: np.ndarray, n: int, seed: int) -> list[np.ndarray]:
    return list(kc.sample_k(box, max(3 * n, 32), seed=seed).points)


def _m_pool(kc: KComplex, i: int, box: np.ndarray, n: int, band: float,
            seed: int) -> list[np.ndarray]:
    return list(kc.sample_m(i, box, max(2 * n, 16), band, seed=seed).points)


# -- regions -----------------------------------------------------------------


def m_on_c(kc: KComplex, H: HybridSystem, i: int, box: np.ndarray, n: int,
           band: float, seed: int) -> list[np.ndarray]:
    """Samples of M_i cap C.

    C-membership is filtered at near-machine tolerance: boundary-only flow
    conditions (eq. on M_i cap C) are sensitive to off-C drift near corners
    where the condition genuinely fails just outside C.
    """
    out = [x for x in _m_pool(kc, i, box, n, band, seed)
           if H.C.classify(x, 1e-9) != geo.Membership.OUTSIDE]
    return out[:n]


def m_band(kc: KComplex, H: HybridSystem, i: int, box: np.ndarray, n: int,
           radius: float, band: float, seed: int) -> list[np.ndarray]:
    """Samples of (U_radius(M_i) \\ K_ei) cap C: perturb M_i anchors off the
    zero level of B_i, then pull back onto C."""
    b_i = kc.barrier.components[i]
    anchors = _m_pool(kc, i, box, n, band, seed)
    if not anchors:
        return []
    rng = rng_for(seed, f"m-band-{i}")
    out: list[np.ndarray] = []
    attempts = 0
    while len(out) < n and attempts < 20 * n:
        attempts += 1
        a = anchors[int(rng.integers(len(anchors)))]
        p = a + _ball(rng, kc.n, radius)
        if float(b_i.fn(p)) <= 1e-12:
            p = a - (p - a)
            if float(b_i.fn(p)) <= 1e-12:
                continue
        if H.C.classify(p, 0.0) == geo.Membership.OUTSIDE:
            q = geo.feasible_point(H.C, p, seed=seed)
            if q is None:
                continue
            p = q
        if float(b_i.fn(p)) <= 1e-12:
            continue
        if H.C.classify(p, _IN_C_TOL) == geo.Membership.OUTSIDE:
            continue
        if float(np.linalg.norm(p - a)) > 2.0 * radius or not _in_box(p, box):
            continue
        out.append(p)
    return out


def outside_band(kc: KComplex, H: HybridSystem, box: np.ndarray, n: int,
                 radius: float, band: float, seed: int) -> list[np.ndarray]:
    """Samples of (U_radius(dK) \\ K) cap C."""
    anchors = _bk_pool(kc, box, n, band, seed)
    if not anchors:
        return []
    rng = rng_for(seed, "outside-band")
    out: list[np.ndarray] = []
    attempts = 0
    while len(out) < n and attempts < 20 * n:
        attempts += 1
        a = anchors[int(rng.integers(len(anchors)))]
        p = a + _ball(rng, kc.n, radius)
        if kc.K.classify(p, 0.0) != geo.Membership.OUTSIDE:
            p = a - (p - a)
        if H.C.classify(p, 0.0) == geo.Membership.OUTSIDE:
            q = geo.feasible_point(H.C, p, seed=seed)
            if q is None:
                continue
            p = q
        if kc.K.classify(p, 0.0) != geo.Membership.OUTSIDE:
            continue
        if H.C.classify(p, _IN_C_TOL) == geo.Membership.OUTSIDE:
            continue
        if float(np.linalg.norm(p - a)) > 2.0 * radius or not _in_box(p, box):
            continue
        out.append(p)
    return out


def ke_boundary_in_c(kc: KComplex, H: HybridSystem, box: np.ndarray, n: int,
                     band: float, seed: int) -> list[np.ndarray]:
    """Samples of dK_e cap C."""
    pts = kc._cached(("bke", box.tobytes(), n, band, seed),
                     lambda: geo.sample_boundary(kc.K_e, box, max(4 * n, 32), band,
                                                 seed=seed).points)
    out = [x for x in pts if H.C.classify(x, _IN_C_TOL) != geo.Membership.OUTSIDE]
    return out[:n]


def anchors_ke_dc(kc: KComplex, H: HybridSystem, box: np.ndarray, n: int,
                  band: float, seed: int) -> list[np.ndarray]:
    """Approximate dK_e cap dC: boundary points of K_e that are boundary-
    classified for C at the band tolerance."""
    pts = kc._cached(("bke", box.tobytes(), n, band, seed),
                     lambda: geo.sample_boundary(kc.K_e, box, max(4 * n, 32), band,
                                                 seed=seed).points)
    out = [x for x in pts if H.C.classify(x, band) == geo.Membership.BOUNDARY]
    return out[:n]


def region_a(kc: KComplex, H: HybridSystem, box: np.ndarray, n: int,
             radius: float, band: float, seed: int) -> list[np.ndarray]:
    """(U_radius(dK_e cap dC) cap dK_e) \\ C."""
    anchors = anchors_ke_dc(kc, H, box, max(n, 16), band, seed)
    if not anchors:
        return []
    rng = rng_for(seed, "region-a")
    bar = kc.barrier
    out: list[np.ndarray] = []
    attempts = 0
    while len(out) < n and attempts < 20 * n:
        attempts += 1
        a = anchors[int(rng.integers(len(anchors)))]
        p = a + _ball(rng, kc.n, radius)
        if bar.bar_value(p) <= 0.0:
            p = a - (p - a)
        y = geo.feasible_point(kc.K_e, p, seed=seed)
        if y is None:
            continue
        if H.C.classify(y, 0.0) != geo.Membership.OUTSIDE:
            continue
        if abs(bar.bar_value(y)) > band:
            continue
        if float(np.linalg.norm(y - a)) > 2.0 * radius or not _in_box(y, box):
            continue
        out.append(y)
    return out


def region_b(kc: KComplex, H: HybridSystem, box: np.ndarray, n: int,
             radius: float, band: float, seed: int) -> list[np.ndarray]:
    """U_radius(dK_e cap dC) cap dK cap dC, via projections onto C."""
    anchors = anchors_ke_dc(kc, H, box, max(n, 16), band, seed)
    if not anchors:
        return []
    rng = rng_for(seed, "region-b")
    out: list[np.ndarray] = [a for a in anchors[:max(2, n // 4)]
                             if kc.K_e.classify(a, _IN_C_TOL) != geo.Membership.OUTSIDE]
    attempts = 0
    while len(out) < n and attempts < 20 * n:
        attempts += 1
        a = anchors[int(rng.integers(len(anchors)))]
        p = a + _ball(rng, kc.n, radius)
        if H.C.classify(p, 0.0) != geo.Membership.OUTSIDE:
            p = a - (p - a)
            if H.C.classify(p, 0.0) != geo.Membership.OUTSIDE:
                continue
        y = geo.feasible_point(H.C, p, seed=seed)
        if y is None:
            continue
        if kc.K_e.classify(y, _IN_C_TOL) == geo.Membership.OUTSIDE:
            continue
        if H.C.classify(y, band) != geo.Membership.BOUNDARY:
            continue
        if float(np.linalg.norm(y - a)) > 2.0 * radius or not _in_box(y, box):
            continue
        out.append(y)
    return out[:n]


def dk_dc(kc: KComplex, H: HybridSystem, box: np.ndarray, n: int, band: float,
          seed: int) -> list[np.ndarray]:
    """Samples of dK cap dC (band-approximate)."""
    pts = _bk_pool(kc, box, n, band, seed)
    out = [x for x in pts if H.C.classify(x, band) == geo.Membership.BOUNDARY]
    return out[:n]


def jump_region(kc: KComplex, H: HybridSystem, box: np.ndarray, n: int,
                seed: int) -> list[np.ndarray]:
    """Samples of K cap D (= K_e cap D)."""

    def compute() -> list[np.ndarray]:
        kd = geo.SetDescription(kc.n, geo.Intersection((H.D.root, kc.K_e.root)),
                                name="KcapD")
        return list(geo.sample(kd, box, n, seed=seed).points)

    return kc._cached(("jump", box.tobytes(), n, seed), compute)


def boundary_jump_region(kc: KComplex, H: HybridSystem, box: np.ndarray, n: int,
                         band: float, seed: int) -> list[np.ndarray]:
    """Samples of dK cap D."""
    pts = jump_region(kc, H, box, 2 * n, seed)
    out = [x for x in pts if kc.K.classify(x, band) == geo.Membership.BOUNDARY]
    return out[:n]


def _strict_leaf_targets(kc: KComplex, H: HybridSystem, box: np.ndarray,
                         starts: list[np.ndarray], band: float,
                         seed: int) -> list[np.ndarray]:
    """Candidate points where a strict leaf of D vanishes on K cap dC.

    Strict leaves carve open exclusions out of D; the excluded boundary piece
    (where flow-existence must be checked) is exactly their zero set.
    """
    out: list[np.ndarray] = []
    strict = [leaf for leaf in H.D.leaves() if leaf.strict]
    if not strict or not starts:
        return out
    cons = [
        {
            "type": "ineq",
            "fun": (lambda y, c=leaf.constraint: -c.value_checked(np.asarray(y))),
            "jac": (lambda y, c=leaf.constraint: -gradient(c, np.asarray(y))),
        }
        for leaf in kc.K_e.leaves()
    ]
    for leaf in strict:
        c = leaf.constraint

        def obj(y: np.ndarray, _c=c) -> float:
            return float(_c.value_checked(np.asarray(y)) ** 2)

        def obj_jac(y: np.ndarray, _c=c) -> np.ndarray:
            y = np.asarray(y)
            return 2.0 * _c.value_checked(y) * gradient(_c, y)

        for y0 in starts[:8]:
            try:
                res = minimize(obj, y0, jac=obj_jac, method="SLSQP", constraints=cons,
                               options={"maxiter": 60, "ftol": 1e-18})
            except (EvaluationError, FloatingPointError):
                continue
            y = np.asarray(res.x, dtype=float)
            if abs(float(c.value_checked(y))) <= 1e-8 and _in_box(y, box):
                out.append(y)
    return out


def _on_strict_exclusion(D: geo.SetDescription, x: np.ndarray,
                         snap: float = 1e-8) -> bool:
    """x sits (numerically) on the zero set of a strict D-leaf, i.e. on the
    boundary piece that D's half-open constraints carve out."""
    return any(leaf.strict and abs(float(leaf.constraint.value_checked(x))) <= snap
               for leaf in D.leaves())


def kdc_not_d(kc: KComplex, H: HybridSystem, box: np.ndarray, n: int,
              band: float, seed: int) -> list[np.ndarray]:
    """Samples of (K cap dC) \\ D.

    Strict membership in D is evaluated at tolerance zero, so half-open
    exclusions count as "not in D"; isolated exclusion points are recovered by
    driving strict D-leaves to zero over K and accepted within a snap
    tolerance (the exact excluded set has measure zero).
    """
    base: list[np.ndarray] = []
    base.extend(_k_pool(kc, box, n, seed))
    base.extend(_bk_pool(kc, box, n, band, seed))
    on_dc = [x for x in base if H.C.classify(x, band) == geo.Membership.BOUNDARY]
    cands = list(on_dc)
    cands.extend(_strict_leaf_targets(kc, H, box, on_dc, band, seed))
    out: list[np.ndarray] = []
    for x in cands:
        if len(out) >= n:
            break
        if H.C.classify(x, band) != geo.Membership.BOUNDARY:
            continue
        # "not in D" with noise slack on closed leaves, strict leaves exact
        if (H.D.classify(x, 1e-9, strict_tol=0.0) != geo.Membership.OUTSIDE
                and not _on_strict_exclusion(H.D, x)):
            continue
        if kc.K.classify(x, _IN_C_TOL) == geo.Membership.OUTSIDE:
            continue
        out.append(x)
    return out


def neighborhood_on_kdc(kc: KComplex, H: HybridSystem, x_o: np.ndarray,
                        box: np.ndarray, radius: float, count: int, band: float,
                        seed: int) -> list[np.ndarray]:
    """Points of K cap dC within `radius` of x_o."""
    rng = rng_for(seed, "kdc-neighborhood")
    out: list[np.ndarray] = []
    attempts = 0
    while len(out) < count and attempts < 20 * count:
        attempts += 1
        p = x_o + _ball(rng, kc.n, radius)
        if H.C.classify(p, 0.0) == geo.Membership.OUTSIDE:
            q = geo.feasible_point(H.C, p, seed=seed)
            if q is None:
                continue
            p = q
        if H.C.classify(p, band) != geo.Membership.BOUNDARY:
            continue
        if kc.K.classify(p, _IN_C_TOL) == geo.Membership.OUTSIDE:
            continue
        if float(np.linalg.norm(p - x_o)) > 1.5 * radius or not _in_box(p, box):
            continue
        out.append(p)
    return out


def ke_c_volume(kc: KComplex, H: HybridSystem, box: np.ndarray, n: int,
                seed: int) -> list[np.ndarray]:
    """Samples of K_e cap C (including its interior)."""

    def compute() -> list[np.ndarray]:
        kec = geo.SetDescription(kc.n, geo.Intersection((kc.K_e.root, H.C.root)),
                                 name="Ke_cap_C")
        return list(geo.sample(kec, box, n, seed=seed).points)

    return kc._cached(("kec", box.tobytes(), n, seed), compute)


def boundary_k_in_c(kc: KComplex, H: HybridSystem, box: np.ndarray, n: int,
                    band: float, seed: int) -> list[np.ndarray]:
    """Samples of dK cap C."""
    pts = _bk_pool(kc, box, n, band, seed)
    out = [x for x in pts if H.C.classify(x, _IN_C_TOL) != geo.Membership.OUTSIDE]
    return out[:n]
