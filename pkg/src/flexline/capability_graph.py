"""Capability model for a manufacturing line.

A small triple store records which agents hold which capabilities, what each
operation needs, and how stations and lines contain things.  Operation
durations are attached to (agent, operation) pairs as time models.  Graphs are
treated as immutable after loading: every update returns a new graph value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    ConsistencyError,
    MissingTimeModel,
    NoCapability,
    ParseError,
    UnknownEntity,
)

KINDS = ("Agent", "Operation", "Station", "Capability", "Resource", "Line")

PREDICATES = ("has", "needs", "contains", "performs", "precedes")

# Allowed (subject kind set, object kind set) per predicate.
_PREDICATE_RULES = {
    "has": ({"Agent", "Station", "Line"}, {"Capability", "Resource"}),
    "needs": ({"Operation"}, {"Capability", "Resource"}),
    "contains": ({"Station", "Line"}, {"Agent", "Operation", "Station", "Resource"}),
    "performs": ({"Agent"}, {"Operation"}),
    "precedes": ({"Operation"}, {"Operation"}),
}


@dataclass(frozen=True, order=True)
class EntityId:
    kind: str
    name: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConsistencyError(f"unknown entity kind {self.kind!r}")
        if not self.name:
            raise ConsistencyError("entity name must be non-empty")

    def encode(self) -> str:
        return f"{self.kind}:{self.name}"

    @staticmethod
    def decode(text: str) -> "EntityId":
        kind, sep, name = text.partition(":")
        if not sep or kind not in KINDS or not name:
            raise ParseError(f"bad entity reference {text!r}")
        return EntityId(kind, name)


@dataclass(frozen=True)
class Triple:
    subject: EntityId
    predicate: str
    object: EntityId

    def __post_init__(self):
        if self.predicate not in PREDICATES:
            raise ConsistencyError(f"unknown predicate {self.predicate!r}")
        subj_kinds, obj_kinds = _PREDICATE_RULES[self.predicate]
        if self.subject.kind not in subj_kinds or self.object.kind not in obj_kinds:
            raise ConsistencyError(
                f"predicate {self.predicate!r} does not allow "
                f"{self.subject.encode()} -> {self.object.encode()}"
            )


_TIME_MODEL_KINDS = ("Constant", "TruncNormal", "LogNormal", "Empirical")

_TRUNCNORM_MAX_REJECTS = 100


@dataclass(frozen=True)
class TimeModel:
    """Duration model for one (agent, operation) pair.

    Parameters are in seconds.  `mean`/`sd` are the arithmetic mean and
    standard deviation for Constant, TruncNormal, and LogNormal kinds;
    Empirical carries raw samples instead.
    """

    kind: str
    mean: float = 0.0
    sd: float = 0.0
    samples: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in _TIME_MODEL_KINDS:
            raise ConsistencyError(f"unknown time model kind {self.kind!r}")
        if self.kind == "Empirical":
            if not self.samples:
                raise ConsistencyError("Empirical time model needs at least one sample")
            if any(s <= 0 for s in self.samples):
                raise ConsistencyError("Empirical samples must be positive")
        else:
            if self.mean <= 0:
                raise ConsistencyError(f"{self.kind} time model needs a positive mean")
            if self.sd < 0:
                raise ConsistencyError("time model sd must be non-negative")

    def expected(self) -> float:
        if self.kind == "Empirical":
            return float(np.mean(self.samples))
        if self.kind == "TruncNormal" and self.sd > 0:
            # Mean of a normal truncated to (0, inf).
            a = -self.mean / self.sd
            phi = math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
            cdf_tail = 0.5 * (1.0 - math.erf(a / math.sqrt(2.0)))
            return self.mean + self.sd * phi / cdf_tail
        return self.mean

    def spread(self) -> float:
        """Nominal standard deviation, used for monitoring thresholds."""
        if self.kind == "Empirical":
            if len(self.samples) < 2:
                return 0.0
            return float(np.std(self.samples, ddof=1))
        if self.kind == "Constant":
            return 0.0
        return self.sd

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "Constant":
            return self.mean
        if self.kind == "Empirical":
            return float(self.samples[int(rng.integers(0, len(self.samples)))])
        if self.kind == "LogNormal":
            if self.sd == 0:
                return self.mean
            sigma2 = math.log(1.0 + (self.sd / self.mean) ** 2)
            mu = math.log(self.mean) - 0.5 * sigma2
            return float(rng.lognormal(mu, math.sqrt(sigma2)))
        # TruncNormal: rejection sample above zero, clamp if the draw keeps
        # failing (pathological sd much larger than mean).
        if self.sd == 0:
            return self.mean
        for _ in range(_TRUNCNORM_MAX_REJECTS):
            value = float(rng.normal(self.mean, self.sd))
            if value > 0:
                return value
        return self.mean / 100.0

    def scaled(self, factor: float) -> "TimeModel":
        """Scale the mean by `factor`, preserving the coefficient of variation."""
        if factor <= 0:
            raise ConsistencyError("scale factor must be positive")
        if self.kind == "Empirical":
            return TimeModel("Empirical", samples=tuple(s * factor for s in self.samples))
        return TimeModel(self.kind, mean=self.mean * factor, sd=self.sd * factor)


@dataclass(frozen=True)
class CapabilityGraph:
    entities: Tuple[EntityId, ...]
    triples: Tuple[Triple, ...]
    time_models: Dict[Tuple[str, str], TimeModel] = field(default_factory=dict)
    agent_types: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for e in self.entities:
            if e in seen:
                raise ConsistencyError(f"duplicate entity {e.encode()}")
            seen.add(e)
        for t in self.triples:
            if t.subject not in seen or t.object not in seen:
                raise ConsistencyError(
                    f"triple references unknown entity: "
                    f"{t.subject.encode()} {t.predicate} {t.object.encode()}"
                )
        for (agent, op) in self.time_models:
            if EntityId("Agent", agent) not in seen:
                raise ConsistencyError(f"time model references unknown agent {agent!r}")
            if EntityId("Operation", op) not in seen:
                raise ConsistencyError(f"time model references unknown operation {op!r}")

    # -- lookups ------------------------------------------------------------

    def find(self, kind: str, name: str) -> EntityId:
        e = EntityId(kind, name)
        if e not in set(self.entities):
            raise UnknownEntity(f"{e.encode()} is not in the graph")
        return e

    def of_kind(self, kind: str) -> List[EntityId]:
        return [e for e in self.entities if e.kind == kind]

    def _as_entity(self, value: Union[EntityId, str], kind: str) -> EntityId:
        if isinstance(value, EntityId):
            if value not in set(self.entities):
                raise UnknownEntity(f"{value.encode()} is not in the graph")
            return value
        return self.find(kind, value)


def _derived_triples(g: CapabilityGraph) -> List[Triple]:
    """One-hop capability transfer: a container `has` whatever its members have.

    Deliberately not chained deeper; a line does not inherit through a station
    to an agent in a single derivation pass.
    """
    held: Dict[EntityId, List[EntityId]] = {}
    for t in g.triples:
        if t.predicate == "has":
            held.setdefault(t.subject, []).append(t.object)
    base = set(g.triples)
    out: List[Triple] = []
    for t in g.triples:
        if t.predicate != "contains":
            continue
        if t.subject.kind not in ("Station", "Line"):
            continue
        for cap in held.get(t.object, []):
            candidate = Triple(t.subject, "has", cap)
            if candidate not in base:
                out.append(candidate)
    return out


def query(
    g: CapabilityGraph,
    subject: Optional[EntityId] = None,
    predicate: Optional[str] = None,
    object: Optional[EntityId] = None,
    derived: bool = False,
) -> List[Triple]:
    """Match triples against a (subject, predicate, object) pattern.

    None acts as a wildcard.  With derived=True, one-hop transferred `has`
    triples are included in the search space.
    """
    if predicate is not None and predicate not in PREDICATES:
        raise ConsistencyError(f"unknown predicate {predicate!r}")
    space: List[Triple] = list(g.triples)
    if derived:
        space.extend(_derived_triples(g))
    out = []
    for t in space:
        if subject is not None and t.subject != subject:
            continue
        if predicate is not None and t.predicate != predicate:
            continue
        if object is not None and t.object != object:
            continue
        out.append(t)
    return out


def _needs_of(g: CapabilityGraph, op: EntityId) -> set:
    return {t.object for t in g.triples if t.predicate == "needs" and t.subject == op}


def _held_by(g: CapabilityGraph, agent: EntityId) -> set:
    return {t.object for t in g.triples if t.predicate == "has" and t.subject == agent}


def achievable_operations(g: CapabilityGraph, agent: Union[EntityId, str]) -> List[EntityId]:
    """Operations whose declared needs are all held by the agent.

    Returned in the graph's operation declaration order.  An operation with no
    declared needs is trivially achievable; shipped datasets always declare
    needs, so this only matters for hand-built toy graphs.
    """
    a = g._as_entity(agent, "Agent")
    held = _held_by(g, a)
    return [op for op in g.of_kind("Operation") if _needs_of(g, op) <= held]


def capable_agents(g: CapabilityGraph, op: Union[EntityId, str]) -> List[EntityId]:
    """Agents that hold every need of the operation, in declaration order."""
    o = g._as_entity(op, "Operation")
    needs = _needs_of(g, o)
    return [a for a in g.of_kind("Agent") if needs <= _held_by(g, a)]


def operation_time(g: CapabilityGraph, agent: Union[EntityId, str], op: Union[EntityId, str]) -> TimeModel:
    a = g._as_entity(agent, "Agent")
    o = g._as_entity(op, "Operation")
    if o not in achievable_operations(g, a):
        raise NoCapability(f"{a.name} cannot perform {o.name}")
    model = g.time_models.get((a.name, o.name))
    if model is None:
        raise MissingTimeModel(f"no time model for ({a.name}, {o.name})")
    return model


def update_time_model(
    g: CapabilityGraph, agent: Union[EntityId, str], op: Union[EntityId, str], model: TimeModel
) -> CapabilityGraph:
    """Return a new graph with the (agent, op) time model replaced."""
    a = g._as_entity(agent, "Agent")
    o = g._as_entity(op, "Operation")
    models = dict(g.time_models)
    models[(a.name, o.name)] = model
    return replace(g, time_models=models)


def remove_capability(
    g: CapabilityGraph, agent: Union[EntityId, str], capability: Union[EntityId, str]
) -> CapabilityGraph:
    """Return a new graph without the agent's `has` edge to the capability.

    Time models of pairs the agent can no longer achieve are dropped with the
    edge, so the result still satisfies the load-time consistency rules.
    """
    a = g._as_entity(agent, "Agent")
    c = g._as_entity(capability, "Capability")
    kept = tuple(
        t
        for t in g.triples
        if not (t.predicate == "has" and t.subject == a and t.object == c)
    )
    out = replace(g, triples=kept)
    reachable = {op.name for op in achievable_operations(out, a)}
    models = {
        key: m
        for key, m in out.time_models.items()
        if key[0] != a.name or key[1] in reachable
    }
    if len(models) != len(out.time_models):
        out = replace(out, time_models=models)
    return out


# -- file format ------------------------------------------------------------

_ENTITY_KEYS = {"kind", "name", "type"}
_TIME_MODEL_KEYS = {"agent", "op", "kind", "mean", "sd", "samples"}
_TOP_KEYS = {"entities", "triples", "time_models"}


def graph_from_dict(data: dict) -> CapabilityGraph:
    if not isinstance(data, dict):
        raise ParseError("graph payload must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ParseError(f"unknown graph keys: {sorted(unknown)}")
    for key in ("entities", "triples"):
        if key not in data or not isinstance(data[key], list):
            raise ParseError(f"graph needs a {key!r} list")

    entities = []
    agent_types: Dict[str, str] = {}
    for row in data["entities"]:
        if not isinstance(row, dict):
            raise ParseError("entity rows must be objects")
        unknown = set(row) - _ENTITY_KEYS
        if unknown:
            raise ParseError(f"unknown entity keys: {sorted(unknown)}")
        try:
            kind, name = row["kind"], row["name"]
        except KeyError as e:
            raise ParseError(f"entity row missing {e.args[0]!r}") from None
        if not isinstance(kind, str) or not isinstance(name, str):
            raise ParseError("entity kind and name must be strings")
        if kind not in KINDS:
            raise ParseError(f"unknown entity kind {kind!r}")
        entities.append(EntityId(kind, name))
        if "type" in row:
            if kind != "Agent" or not isinstance(row["type"], str):
                raise ParseError("only agents may carry a 'type' string")
            agent_types[name] = row["type"]

    triples = []
    for row in data["triples"]:
        if not (isinstance(row, list) and len(row) == 3 and all(isinstance(x, str) for x in row)):
            raise ParseError("triple rows must be [subject, predicate, object] strings")
        subj, pred, obj = row
        if pred not in PREDICATES:
            raise ParseError(f"unknown predicate {pred!r}")
        try:
            triples.append(Triple(EntityId.decode(subj), pred, EntityId.decode(obj)))
        except ConsistencyError as e:
            raise ParseError(str(e)) from None

    time_models: Dict[Tuple[str, str], TimeModel] = {}
    for row in data.get("time_models", []):
        if not isinstance(row, dict):
            raise ParseError("time model rows must be objects")
        unknown = set(row) - _TIME_MODEL_KEYS
        if unknown:
            raise ParseError(f"unknown time model keys: {sorted(unknown)}")
        for key in ("agent", "op", "kind"):
            if key not in row or not isinstance(row[key], str):
                raise ParseError(f"time model row needs a string {key!r}")
        kind = row["kind"]
        if kind not in _TIME_MODEL_KINDS:
            raise ParseError(f"unknown time model kind {kind!r}")
        try:
            if kind == "Empirical":
                samples = row.get("samples")
                if not isinstance(samples, list):
                    raise ParseError("Empirical time model needs a 'samples' list")
                model = TimeModel("Empirical", samples=tuple(float(s) for s in samples))
            else:
                if "mean" not in row:
                    raise ParseError(f"{kind} time model needs a 'mean'")
                model = TimeModel(kind, mean=float(row["mean"]), sd=float(row.get("sd", 0.0)))
        except (TypeError, ValueError):
            raise ParseError("time model parameters must be numbers") from None
        except ConsistencyError as e:
            raise ParseError(str(e)) from None
        key = (row["agent"], row["op"])
        if key in time_models:
            raise ParseError(f"duplicate time model for {key}")
        time_models[key] = model

    try:
        g = CapabilityGraph(tuple(entities), tuple(triples), time_models, agent_types)
    except ConsistencyError:
        raise

    _check_consistency(g)
    return g


def _check_consistency(g: CapabilityGraph) -> None:
    """Load-time invariants beyond raw reference validity."""
    for (agent, op) in g.time_models:
        a, o = EntityId("Agent", agent), EntityId("Operation", op)
        if not _needs_of(g, o) <= _held_by(g, a):
            raise ConsistencyError(
                f"time model for ({agent}, {op}) but the agent lacks a needed capability"
            )
    # Every operation contained in a line must have someone able to do it.
    for line in g.of_kind("Line"):
        for t in g.triples:
            if t.predicate == "contains" and t.subject == line and t.object.kind == "Operation":
                if not capable_agents(g, t.object):
                    raise ConsistencyError(
                        f"operation {t.object.name} in {line.name} has no capable agent"
                    )


def graph_to_dict(g: CapabilityGraph) -> dict:
    entities = []
    for e in g.entities:
        row: dict = {"kind": e.kind, "name": e.name}
        if e.kind == "Agent" and e.name in g.agent_types:
            row["type"] = g.agent_types[e.name]
        entities.append(row)
    triples = [[t.subject.encode(), t.predicate, t.object.encode()] for t in g.triples]
    model_rows = []
    for (agent, op), m in sorted(g.time_models.items()):
        row = {"agent": agent, "op": op, "kind": m.kind}
        if m.kind == "Empirical":
            row["samples"] = list(m.samples)
        else:
            row["mean"] = m.mean
            row["sd"] = m.sd
        model_rows.append(row)
    return {"entities": entities, "triples": triples, "time_models": model_rows}


def load_graph(path: str) -> CapabilityGraph:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno) from None
    except OSError as e:
        raise ParseError(f"cannot read graph file: {e}") from None
    return graph_from_dict(data)


def save_graph(g: CapabilityGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(g), fh, indent=2, sort_keys=False)
        fh.write("\n")
