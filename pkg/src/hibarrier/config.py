"""System configuration files: JSON documents with expression-string leaves."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import expr as ex
from . import geometry as geo
from .fields import ScalarField, SetValuedMap
from .model import BarrierCandidate, HybridSystem

__all__ = ["ConfigError", "SystemBundle", "load_system", "system_from_dict"]

C1 = "c1"
LIPSCHITZ = "lipschitz"


class ConfigError(ValueError):
    """Malformed configuration; message carries the path and any parser
    diagnostic position."""


@dataclass
class SystemBundle:
    system: HybridSystem
    barrier: BarrierCandidate
    box: np.ndarray
    expected: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    raw: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.system.name


def _parse_expr(text: str, n: int, k: int, constants: dict, where: str) -> ex.Ast:
    try:
        return ex.parse(text, n, k, constants)
    except ex.ExprError as e:
        raise ConfigError(f"{where}: {e.diagnostic} in {text!r}") from e


def _field_from_expr(text: str, n: int, constants: dict, where: str,
                     smoothness: str = C1) -> ScalarField:
    ast = _parse_expr(text, n, 0, constants, where)
    fn_xp = ex.compile_ast(ast)

    def fn(x: np.ndarray, _f=fn_xp) -> float:
        return _f(x, ())

    grad_fns = []
    smooth = True
    for i in range(n):
        d = ex.differentiate(ast, i)
        if isinstance(d, ex.NonSmoothMarker):
            smooth = False
            break
        grad_fns.append(ex.compile_ast(d))
    grad = None
    if smooth:
        def grad(x: np.ndarray, _gs=tuple(grad_fns)) -> np.ndarray:
            return np.array([g(x, ()) for g in _gs])

    if smoothness not in (C1, LIPSCHITZ):
        raise ConfigError(f"{where}: smoothness must be 'c1' or 'lipschitz', "
                          f"got {smoothness!r}")
    return ScalarField(n=n, fn=fn, grad=grad, tag=smoothness, name=text)


def _set_from_tree(tree, n: int, constants: dict, where: str) -> geo.Node:
    if isinstance(tree, str):
        return geo.Leaf(_field_from_expr(tree, n, constants, where))
    if isinstance(tree, dict):
        if "leaf" in tree:
            strict = bool(tree.get("strict", False))
            return geo.Leaf(_field_from_expr(tree["leaf"], n, constants, where),
                            strict=strict)
        if "all" in tree:
            children = tuple(_set_from_tree(c, n, constants, f"{where}.all[{i}]")
                             for i, c in enumerate(tree["all"]))
            if not children:
                raise ConfigError(f"{where}: empty 'all'")
            return geo.Intersection(children)
        if "any" in tree:
            children = tuple(_set_from_tree(c, n, constants, f"{where}.any[{i}]")
                             for i, c in enumerate(tree["any"]))
            if not children:
                raise ConfigError(f"{where}: empty 'any'")
            return geo.Union(children)
    raise ConfigError(f"{where}: set trees are expression strings or objects "
                      "with 'leaf'/'all'/'any'")


def _map_from_exprs(exprs, n: int, k: int, constants: dict, where: str,
                    name: str) -> SetValuedMap:
    if not isinstance(exprs, (list, tuple)) or len(exprs) != n:
        raise ConfigError(f"{where}: expected {n} component expressions")
    asts = [_parse_expr(t, n, k, constants, f"{where}[{i}]")
            for i, t in enumerate(exprs)]
    fns = [ex.compile_ast(a) for a in asts]

    def fn(x: np.ndarray, lam: np.ndarray, _fns=tuple(fns)) -> np.ndarray:
        return np.array([f(x, lam) for f in _fns])

    return SetValuedMap(n=n, k=k, fn=fn, name=name)


def system_from_dict(doc: dict, source: str = "<dict>") -> SystemBundle:
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be an object")
    try:
        n = int(doc["dim"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"{source}: missing or invalid 'dim'")
    if n < 1:
        raise ConfigError(f"{source}: 'dim' must be >= 1")
    constants = {str(k): float(v) for k, v in doc.get("constants", {}).items()}
    k = int(doc.get("params", 0))
    if k < 0:
        raise ConfigError(f"{source}: 'params' must be >= 0")
    for key in ("C", "D", "F", "G", "barrier", "box"):
        if key not in doc:
            raise ConfigError(f"{source}: missing '{key}'")

    C = geo.SetDescription(n, _set_from_tree(doc["C"], n, constants, "C"), name="C")
    D = geo.SetDescription(n, _set_from_tree(doc["D"], n, constants, "D"), name="D")
    F = _map_from_exprs(doc["F"], n, k, constants, "F", "F")
    G = _map_from_exprs(doc["G"], n, k, constants, "G", "G")

    barrier_spec = doc["barrier"]
    if not isinstance(barrier_spec, list) or not barrier_spec:
        raise ConfigError(f"{source}: 'barrier' must be a nonempty array")
    comps = []
    for i, item in enumerate(barrier_spec):
        if isinstance(item, str):
            text, smooth = item, C1
        elif isinstance(item, dict):
            text = item.get("expr")
            smooth = item.get("smoothness", C1)
            if not isinstance(text, str):
                raise ConfigError(f"{source}: barrier[{i}] needs an 'expr' string")
        else:
            raise ConfigError(f"{source}: barrier[{i}] must be a string or object")
        comps.append(_field_from_expr(text, n, constants, f"barrier[{i}]", smooth))
    barrier = BarrierCandidate(tuple(comps))

    box = np.asarray(doc["box"], dtype=float)
    if box.shape != (n, 2) or np.any(box[:, 1] <= box[:, 0]):
        raise ConfigError(f"{source}: 'box' must be {n} pairs [lo, hi] with lo < hi")

    system = HybridSystem(n=n, C=C, F=F, D=D, G=G,
                          name=str(doc.get("name", source)), constants=constants)
    return SystemBundle(system=system, barrier=barrier, box=box,
                        expected=doc.get("expected", {}),
                        notes=[str(s) for s in doc.get("notes", [])],
                        raw=doc)


def load_system(path: str | Path) -> SystemBundle:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"{path}: {e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    return system_from_dict(doc, source=str(path))
