"""Intent translation: turn user-expressed intents into standardized goals.

Two input forms are supported: structured JSON documents and one-sentence
template text ("Achieve the highest <kpi> for <task> under a <N><unit>
<quantity> constraint."). Parsed goals canonicalize units (Hz, bits,
seconds, joules) and can be encoded to a flat triple record that
round-trips losslessly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional


class IntentError(Exception):
    """Base class for intent translation failures."""


class UnrecognizedTemplate(IntentError):
    """Free-text intent matched none of the fixed sentence templates."""


class SchemaViolation(IntentError):
    """Structured intent body is missing or violates required fields."""


class SourceKind(str, Enum):
    STRUCTURED = "structured"
    PATTERN_TEXT = "pattern_text"


class Direction(str, Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class Relation(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


@dataclass(frozen=True)
class IntentSpec:
    """Raw intent input prior to translation."""

    source_kind: SourceKind
    body: str

    def __post_init__(self) -> None:
        if not self.body or not self.body.strip():
            raise SchemaViolation("intent body must be non-empty")


@dataclass(frozen=True)
class Kpi:
    name: str
    direction: Direction
    target_value: Optional[float] = None
    target_unit: Optional[str] = None

    def __post_init__(self) -> None:
        if (self.target_value is None) != (self.target_unit is None):
            raise SchemaViolation("KPI target needs both value and unit")
        if self.target_value is not None and not _finite(self.target_value):
            raise SchemaViolation(f"KPI {self.name}: target must be finite")


@dataclass(frozen=True)
class Constraint:
    quantity: str
    relation: Relation
    value: float
    unit: str

    def __post_init__(self) -> None:
        if not _finite(self.value):
            raise SchemaViolation(f"constraint {self.quantity}: value must be finite")


@dataclass(frozen=True)
class Goal:
    """Translated intent: task type, KPIs, constraints, trade-off weights.

    KPIs and constraints are stored in a canonical sort order so that
    semantically equal goals compare equal and encode to identical records.
    """

    task_type: str
    kpis: tuple[Kpi, ...] = ()
    constraints: tuple[Constraint, ...] = ()
    tradeoffs: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        kpis = tuple(sorted(self.kpis, key=lambda k: k.name))
        names = [k.name for k in kpis]
        if len(set(names)) != len(names):
            raise SchemaViolation("KPI names must be unique")
        cons = tuple(
            sorted(
                self.constraints,
                key=lambda c: (c.quantity, c.relation.value, c.value, c.unit),
            )
        )
        object.__setattr__(self, "kpis", kpis)
        object.__setattr__(self, "constraints", cons)
        if self.tradeoffs:
            weights = list(self.tradeoffs.values())
            if any(w < 0 or w > 1 for w in weights):
                raise SchemaViolation("trade-off weights must lie in [0, 1]")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise SchemaViolation("non-empty trade-off weights must sum to 1")

    def constraint_value(self, quantity: str) -> Optional[float]:
        """Canonical value of the first constraint on ``quantity``, if any."""
        for c in self.constraints:
            if c.quantity == quantity:
                return c.value
        return None


@dataclass(frozen=True)
class GoalRecord:
    """Flat (subject, predicate, object) triples encoding a goal."""

    triples: tuple[tuple[str, str, str], ...]


@dataclass(frozen=True)
class Finding:
    code: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def ok(self) -> bool:
        return not self.findings


# Unit canonicalization: scale factor to the canonical unit plus the suffix
# used when building canonical quantity identifiers (bandwidth -> bandwidth_hz).
_UNITS = {
    "hz": (1.0, "Hz", "hz"),
    "khz": (1e3, "Hz", "hz"),
    "mhz": (1e6, "Hz", "hz"),
    "ghz": (1e9, "Hz", "hz"),
    "bit": (1.0, "bit", "bits"),
    "bits": (1.0, "bit", "bits"),
    "kbit": (1e3, "bit", "bits"),
    "mbit": (1e6, "bit", "bits"),
    "s": (1.0, "s", "s"),
    "ms": (1e-3, "s", "s"),
    "j": (1.0, "J", "j"),
    "mj": (1e-3, "J", "j"),
}

_KPI_ALIASES = {
    "task success rate": "success_rate",
    "success rate": "success_rate",
    "latency": "latency_s",
    "end-to-end latency": "latency_s",
    "energy": "energy_j",
}

_TEMPLATE = re.compile(
    r"^\s*Achieve the (?P<dir>highest|lowest) (?P<kpi>.+?) for (?P<task>.+?)"
    r" under a (?P<value>\d+(?:\.\d+)?)\s*(?P<unit>[A-Za-z]+)"
    r" (?P<quantity>[A-Za-z][A-Za-z ]*?) constraint\.?\s*$"
)


def _finite(x: float) -> bool:
    return x == x and x not in (float("inf"), float("-inf"))


def _snake(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", text.strip().lower()).strip("_")


def canonicalize_quantity(quantity: str, value: float, unit: str) -> tuple[str, float, str]:
    """Map (quantity, value, unit) to canonical units.

    Returns (quantity_id, canonical_value, canonical_unit); e.g.
    ("bandwidth", 5, "MHz") -> ("bandwidth_hz", 5e6, "Hz").
    """
    key = unit.strip().lower()
    if key not in _UNITS:
        raise SchemaViolation(f"unknown unit {unit!r}")
    scale, canonical_unit, suffix = _UNITS[key]
    qid = _snake(quantity)
    if not qid.endswith("_" + suffix):
        qid = f"{qid}_{suffix}"
    return qid, value * scale, canonical_unit


def parse_intent(spec: IntentSpec) -> Goal:
    """Translate an intent into a Goal.

    Raises UnrecognizedTemplate for free text outside the fixed grammar and
    SchemaViolation for malformed structured bodies.
    """
    if spec.source_kind is SourceKind.PATTERN_TEXT:
        return _parse_pattern_text(spec.body)
    return _parse_structured(spec.body)


def _parse_pattern_text(text: str) -> Goal:
    m = _TEMPLATE.match(text)
    if m is None:
        raise UnrecognizedTemplate(f"text matches no intent template: {text!r}")
    kpi_text = m.group("kpi").strip().lower()
    kpi_name = _KPI_ALIASES.get(kpi_text, _snake(kpi_text))
    direction = Direction.MAXIMIZE if m.group("dir") == "highest" else Direction.MINIMIZE
    quantity, value, unit = canonicalize_quantity(
        m.group("quantity"), float(m.group("value")), m.group("unit")
    )
    return Goal(
        task_type=_snake(m.group("task")),
        kpis=(Kpi(kpi_name, direction),),
        constraints=(Constraint(quantity, Relation.LE, value, unit),),
    )


def _parse_structured(body: str) -> Goal:
    try:
        doc = json.loads(body)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"structured intent is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation("structured intent must be a single JSON object")
    if "task_type" not in doc or not doc["task_type"]:
        raise SchemaViolation("structured intent is missing task_type")

    kpis = []
    for entry in doc.get("kpis", []):
        try:
            direction = Direction(entry.get("direction", "maximize"))
        except ValueError as exc:
            raise SchemaViolation(f"bad KPI direction: {entry!r}") from exc
        target = entry.get("target")
        if target is None:
            kpis.append(Kpi(str(entry["name"]), direction))
        else:
            kpis.append(
                Kpi(
                    str(entry["name"]),
                    direction,
                    float(target["value"]),
                    str(target["unit"]),
                )
            )
    constraints = []
    for entry in doc.get("constraints", []):
        try:
            relation = Relation(entry["relation"])
        except (KeyError, ValueError) as exc:
            raise SchemaViolation(f"bad constraint relation: {entry!r}") from exc
        quantity, value, unit = canonicalize_quantity(
            str(entry["quantity"]), float(entry["value"]), str(entry.get("unit", ""))
        )
        constraints.append(Constraint(quantity, relation, value, unit))
    tradeoffs = {str(k): float(v) for k, v in doc.get("tradeoffs", {}).items()}
    return Goal(
        task_type=str(doc["task_type"]),
        kpis=tuple(kpis),
        constraints=tuple(constraints),
        tradeoffs=tradeoffs,
    )


def _kpi_obj(k: Kpi) -> str:
    target = None
    if k.target_value is not None:
        target = {"unit": k.target_unit, "value": k.target_value}
    return json.dumps(
        {"direction": k.direction.value, "name": k.name, "target": target},
        sort_keys=True,
        separators=(",", ":"),
    )


def _constraint_obj(c: Constraint) -> str:
    return json.dumps(
        {
            "quantity": c.quantity,
            "relation": c.relation.value,
            "unit": c.unit,
            "value": c.value,
        },
        sort_keys=True,
        separators=(",", ":"),
    )


def encode_goal(goal: Goal) -> GoalRecord:
    """Encode a goal as deterministic flat triples.

    One hasTaskType triple plus one triple per KPI, constraint, and
    trade-off entry; ordering is lexicographic by (predicate, object).
    """
    subject = f"goal/{goal.task_type}"
    triples = [(subject, "hasTaskType", goal.task_type)]
    triples += [(subject, "hasKpi", _kpi_obj(k)) for k in goal.kpis]
    triples += [(subject, "hasConstraint", _constraint_obj(c)) for c in goal.constraints]
    triples += [
        (
            subject,
            "hasTradeoff",
            json.dumps({"kpi": name, "weight": w}, sort_keys=True, separators=(",", ":")),
        )
        for name, w in sorted(goal.tradeoffs.items())
    ]
    triples.sort(key=lambda t: (t[1], t[2]))
    return GoalRecord(tuple(triples))


def decode_goal(record: GoalRecord) -> Goal:
    """Inverse of encode_goal; decode(encode(g)) == g for every valid goal."""
    task_type = None
    kpis: list[Kpi] = []
    constraints: list[Constraint] = []
    tradeoffs: dict[str, float] = {}
    for _, predicate, obj in record.triples:
        if predicate == "hasTaskType":
            task_type = obj
        elif predicate == "hasKpi":
            doc = json.loads(obj)
            target = doc["target"]
            kpis.append(
                Kpi(
                    doc["name"],
                    Direction(doc["direction"]),
                    None if target is None else target["value"],
                    None if target is None else target["unit"],
                )
            )
        elif predicate == "hasConstraint":
            doc = json.loads(obj)
            constraints.append(
                Constraint(doc["quantity"], Relation(doc["relation"]), doc["value"], doc["unit"])
            )
        elif predicate == "hasTradeoff":
            doc = json.loads(obj)
            tradeoffs[doc["kpi"]] = doc["weight"]
        else:
            raise SchemaViolation(f"unknown predicate {predicate!r}")
    if task_type is None:
        raise SchemaViolation("record has no hasTaskType triple")
    return Goal(task_type, tuple(kpis), tuple(constraints), tradeoffs)


# Physical quantities that must be strictly positive in any constraint.
_POSITIVE_QUANTITIES = {"bandwidth_hz", "latency_s", "energy_j", "size_bits"}


def validate_goal(goal: Goal, templates: Mapping[str, "object"]) -> ValidationReport:
    """Check a goal against registered task templates.

    ``templates`` maps task_type to template objects exposing a ``kpis``
    attribute (names the task can report). Findings never raise; callers
    decide how to react.
    """
    if not templates:
        raise ValueError("templates must be non-empty")
    findings: list[Finding] = []
    template = templates.get(goal.task_type)
    if template is None:
        findings.append(Finding("UnknownTask", f"no template for task {goal.task_type!r}"))
    else:
        known = set(getattr(template, "kpis", ()))
        for k in goal.kpis:
            if known and k.name not in known:
                findings.append(
                    Finding("UnknownKpi", f"KPI {k.name!r} not produced by {goal.task_type!r}")
                )
    findings.extend(_constraint_findings(goal.constraints))
    return ValidationReport(tuple(findings))


def _constraint_findings(constraints: Iterable[Constraint]) -> list[Finding]:
    findings = []
    upper: dict[str, float] = {}
    lower: dict[str, float] = {}
    for c in constraints:
        if c.quantity in _POSITIVE_QUANTITIES and c.value <= 0 and c.relation is not Relation.GE:
            findings.append(
                Finding(
                    "InfeasibleConstraint",
                    f"{c.quantity} {c.relation.value} {c.value} admits no positive value",
                )
            )
        if c.relation is Relation.LE:
            upper[c.quantity] = min(upper.get(c.quantity, float("inf")), c.value)
        elif c.relation is Relation.GE:
            lower[c.quantity] = max(lower.get(c.quantity, float("-inf")), c.value)
        else:
            upper[c.quantity] = min(upper.get(c.quantity, float("inf")), c.value)
            lower[c.quantity] = max(lower.get(c.quantity, float("-inf")), c.value)
    for quantity in set(upper) & set(lower):
        if lower[quantity] > upper[quantity]:
            findings.append(
                Finding(
                    "InfeasibleConstraint",
                    f"{quantity}: lower bound {lower[quantity]} exceeds upper {upper[quantity]}",
                )
            )
    return findings
