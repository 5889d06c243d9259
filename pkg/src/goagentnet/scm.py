"""Structural causal model over agent-level quantities and global goals.

Equations are scalar functions with declared per-input monotonicity signs,
which keeps interventional bound search (do-operator plus bisection)
well-posed. Models are immutable after build; interventions return new
models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence


class ScmError(Exception):
    """Base class for structural-model failures."""


class CycleDetected(ScmError):
    pass


class DuplicateDefinition(ScmError):
    pass


class MonotonicityViolation(ScmError):
    """Sampled function values contradict a declared monotonicity sign."""


class MissingExogenous(ScmError):
    pass


class UnknownVariable(ScmError):
    pass


class Unsatisfiable(ScmError):
    """No value in the search range reaches the goal threshold."""


class NonMonotonePath(ScmError):
    """Declared signs along target->goal paths conflict or point downward."""


@dataclass(frozen=True)
class StructuralEquation:
    """One endogenous variable as a function of its parents.

    ``signs`` declares the monotonic direction of ``fn`` per input
    (+1 non-decreasing, -1 non-increasing); ``domains`` bounds each input
    for the sampling check performed at build time.
    """

    output: str
    inputs: tuple[str, ...]
    fn: Callable[..., float]
    signs: tuple[int, ...]
    domains: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if len(self.signs) != len(self.inputs):
            raise ValueError(f"{self.output}: one sign per input required")
        if any(s not in (-1, 0, 1) for s in self.signs):
            raise ValueError(f"{self.output}: signs must be -1, 0, or +1")
        if not self.domains:
            object.__setattr__(self, "domains", tuple((0.0, 1.0) for _ in self.inputs))
        elif len(self.domains) != len(self.inputs):
            raise ValueError(f"{self.output}: one domain per input required")


@dataclass(frozen=True)
class Scm:
    equations: dict[str, StructuralEquation]
    exogenous: frozenset[str]
    topo_order: tuple[str, ...]

    @property
    def variables(self) -> frozenset[str]:
        return self.exogenous | frozenset(self.equations)


def build_scm(
    equations: Iterable[StructuralEquation],
    check_monotonicity: bool = True,
    samples: int = 9,
) -> Scm:
    """Assemble and validate a model from structural equations.

    Raises DuplicateDefinition when a variable has two defining equations,
    CycleDetected when the dependency graph is not a DAG, and
    MonotonicityViolation when sampled values contradict declared signs.
    """
    eqs: dict[str, StructuralEquation] = {}
    for eq in equations:
        if eq.output in eqs:
            raise DuplicateDefinition(f"variable {eq.output!r} defined twice")
        eqs[eq.output] = eq

    all_inputs = {v for eq in eqs.values() for v in eq.inputs}
    exogenous = frozenset(all_inputs - set(eqs))
    topo = _topo_sort(eqs, exogenous)
    if check_monotonicity:
        for eq in eqs.values():
            _check_signs(eq, samples)
    return Scm(equations=eqs, exogenous=exogenous, topo_order=topo)


def _topo_sort(eqs: Mapping[str, StructuralEquation], exogenous: frozenset[str]) -> tuple[str, ...]:
    indegree = {name: sum(1 for v in eq.inputs if v in eqs) for name, eq in eqs.items()}
    ready = sorted(name for name, deg in indegree.items() if deg == 0)
    consumers: dict[str, list[str]] = {}
    for name, eq in eqs.items():
        for v in eq.inputs:
            if v in eqs:
                consumers.setdefault(v, []).append(name)
    order: list[str] = []
    while ready:
        name = ready.pop(0)
        order.append(name)
        for child in sorted(consumers.get(name, ())):
            indegree[child] -= 1
            if indegree[child] == 0:
                ready.append(child)
        ready.sort()
    if len(order) != len(eqs):
        cyclic = sorted(set(eqs) - set(order))
        raise CycleDetected(f"cyclic dependency among {cyclic}")
    return tuple(order)


def _check_signs(eq: StructuralEquation, samples: int) -> None:
    # Sweep one input over its domain with the others held at midpoints;
    # a sampled inversion against the declared sign fails the build.
    if not eq.inputs:
        return
    mids = [(lo + hi) / 2.0 for lo, hi in eq.domains]
    for idx, (sign, (lo, hi)) in enumerate(zip(eq.signs, eq.domains)):
        if sign == 0:
            continue
        previous = None
        for step in range(samples):
            x = lo + (hi - lo) * step / (samples - 1)
            args = list(mids)
            args[idx] = x
            value = eq.fn(*args)
            if previous is not None:
                if sign > 0 and value < previous - 1e-12:
                    raise MonotonicityViolation(
                        f"{eq.output}: decreasing in {eq.inputs[idx]} despite sign +1"
                    )
                if sign < 0 and value > previous + 1e-12:
                    raise MonotonicityViolation(
                        f"{eq.output}: increasing in {eq.inputs[idx]} despite sign -1"
                    )
            previous = value


def evaluate(scm: Scm, assignment: Mapping[str, float]) -> dict[str, float]:
    """Compute every variable from an exogenous assignment, in topo order."""
    missing = sorted(scm.exogenous - set(assignment))
    if missing:
        raise MissingExogenous(f"no values for exogenous variables {missing}")
    values: dict[str, float] = {v: float(assignment[v]) for v in scm.exogenous}
    for name in scm.topo_order:
        eq = scm.equations[name]
        values[name] = float(eq.fn(*(values[v] for v in eq.inputs)))
    return values


def intervene(scm: Scm, var: str, value: float) -> Scm:
    """Apply do(var = value): replace the defining equation by a constant.

    Downstream equations are untouched; intervening on an exogenous
    variable is equivalent to assigning it.
    """
    if var not in scm.variables:
        raise UnknownVariable(f"variable {var!r} not in model")
    constant = StructuralEquation(
        output=var, inputs=(), fn=lambda value=value: value, signs=()
    )
    eqs = dict(scm.equations)
    eqs[var] = constant
    exogenous = frozenset(scm.exogenous - {var})
    topo = _topo_sort(eqs, exogenous)
    return Scm(equations=eqs, exogenous=exogenous, topo_order=topo)


def _path_sign(scm: Scm, source: str, goal: str) -> int | None:
    """Net monotonic sign of every source->goal path, or None if unreached.

    Raises NonMonotonePath when two paths carry conflicting signs.
    """
    signs: dict[str, int] = {source: 1}
    for name in scm.topo_order:
        eq = scm.equations[name]
        acc = None
        for v, s in zip(eq.inputs, eq.signs):
            if v in signs:
                contrib = signs[v] * s
                if acc is None:
                    acc = contrib
                elif acc != contrib:
                    raise NonMonotonePath(
                        f"conflicting monotonicity along paths {source} -> {name}"
                    )
        if acc is not None:
            if name in signs and signs[name] != acc:
                raise NonMonotonePath(f"conflicting monotonicity at {name}")
            signs[name] = acc
    return signs.get(goal)


def derive_bound(
    scm: Scm,
    goal_var: str,
    threshold: float,
    target_var: str,
    search_range: tuple[float, float],
    baseline: Mapping[str, float],
    rel_tolerance: float = 1e-6,
) -> float:
    """Minimal target value whose intervention meets the goal threshold.

    Searches by bisection to ``rel_tolerance`` of the range width,
    exploiting that the goal is monotone non-decreasing in the target
    along the declared signs. Raises Unsatisfiable when even the range
    maximum misses the threshold and NonMonotonePath when declared signs
    conflict or point downward.
    """
    if goal_var not in scm.variables:
        raise UnknownVariable(f"goal variable {goal_var!r} not in model")
    if target_var not in scm.variables:
        raise UnknownVariable(f"target variable {target_var!r} not in model")
    lo, hi = float(search_range[0]), float(search_range[1])
    if not (lo < hi) or math.isinf(lo) or math.isinf(hi):
        raise ValueError("search_range must be a finite non-empty interval")

    sign = _path_sign(scm, target_var, goal_var)
    if sign is not None and sign < 0:
        raise NonMonotonePath(f"{goal_var} is non-increasing in {target_var}")

    def value_at(v: float) -> float:
        model = intervene(scm, target_var, v)
        assignment = {k: baseline[k] for k in model.exogenous if k in baseline}
        return evaluate(model, assignment)[goal_var]

    if value_at(hi) < threshold:
        raise Unsatisfiable(
            f"{goal_var} stays below {threshold} over the whole search range"
        )
    if value_at(lo) >= threshold:
        return lo
    tolerance = rel_tolerance * (hi - lo)
    while hi - lo > tolerance:
        mid = (lo + hi) / 2.0
        if value_at(mid) >= threshold:
            hi = mid
        else:
            lo = mid
    return hi


# --- config-loadable function kinds -------------------------------------

def equation_from_config(doc: Mapping[str, object]) -> StructuralEquation:
    """Build an equation from a config entry.

    Supported kinds: linear, min, saturation, exp_decay, hyperbolic_decay.
    """
    output = str(doc["output"])
    inputs = tuple(str(v) for v in doc.get("inputs", ()))
    kind = str(doc["kind"])
    params: Mapping[str, object] = doc.get("params", {})  # type: ignore[assignment]
    domains = tuple(
        (float(lo), float(hi)) for lo, hi in params.get("domains", ())
    )

    if kind == "linear":
        bias = float(params.get("bias", 0.0))
        coeffs = tuple(float(c) for c in params.get("coeffs", (1.0,) * len(inputs)))
        if len(coeffs) != len(inputs):
            raise ValueError(f"{output}: linear needs one coefficient per input")

        def fn(*xs: float, bias=bias, coeffs=coeffs) -> float:
            return bias + sum(c * x for c, x in zip(coeffs, xs))

        signs = tuple(0 if c == 0 else (1 if c > 0 else -1) for c in coeffs)
    elif kind == "min":
        fn = lambda *xs: min(xs)  # noqa: E731
        signs = tuple(1 for _ in inputs)
    elif kind == "saturation":
        if len(inputs) != 1:
            raise ValueError(f"{output}: saturation takes one input")
        cap = float(params["cap"])
        gain = float(params.get("gain", 1.0))
        bias = float(params.get("bias", 0.0))
        fn = lambda x, cap=cap, gain=gain, bias=bias: min(cap, bias + gain * x)  # noqa: E731
        signs = (0 if gain == 0 else (1 if gain > 0 else -1),)
    elif kind == "exp_decay":
        if len(inputs) != 1:
            raise ValueError(f"{output}: exp_decay takes one input")
        scale = float(params.get("scale", 1.0))
        rate = float(params["rate"])
        if rate < 0 or scale < 0:
            raise ValueError(f"{output}: exp_decay needs rate >= 0 and scale >= 0")
        fn = lambda x, scale=scale, rate=rate: scale * math.exp(-rate * x)  # noqa: E731
        signs = (-1 if rate > 0 and scale > 0 else 0,)
    elif kind == "hyperbolic_decay":
        if len(inputs) != 1:
            raise ValueError(f"{output}: hyperbolic_decay takes one input")
        scale = float(params.get("scale", 1.0))
        rate = float(params.get("rate", 1.0))
        if rate < 0 or scale < 0:
            raise ValueError(f"{output}: hyperbolic_decay needs rate >= 0 and scale >= 0")
        fn = lambda x, scale=scale, rate=rate: scale / (1.0 + rate * x)  # noqa: E731
        signs = (-1 if rate > 0 and scale > 0 else 0,)
    else:
        raise ValueError(f"unknown equation kind {kind!r}")

    if domains:
        return StructuralEquation(output, inputs, fn, signs, domains)
    return StructuralEquation(output, inputs, fn, signs)


def scm_from_config(entries: Sequence[Mapping[str, object]]) -> Scm:
    return build_scm([equation_from_config(e) for e in entries])
