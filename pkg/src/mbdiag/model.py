"""System models: components with guarded causal functions, wiring, domains.

A model document is UTF-8 JSON with top-level keys `components`,
`connections`, `observables`, and optional `epsilon` / `time_horizon`.
Models are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Optional

from .exprs import Expr, ExpressionError, KEYWORDS, compile_source

DEFAULT_PRIOR = 1e-4
DEFAULT_EPSILON = 0.05


class ModelError(Exception):
    """Base class for model construction problems."""


class ParseError(ModelError):
    """Model document does not conform to the expected format."""


@dataclass(frozen=True)
class Domain:
    """Output value domain of a component."""

    kind: str  # "boolean" | "integer" | "real" | "enum"
    symbols: tuple = ()
    tolerance: float = 0.0

    def contains(self, value: Any) -> bool:
        if self.kind == "boolean":
            return isinstance(value, bool)
        if self.kind == "integer":
            return isinstance(value, int) and not isinstance(value, bool)
        if self.kind == "real":
            return isinstance(value, (int, float)) and not isinstance(value, bool)
        return value in self.symbols

    def equal(self, a: Any, b: Any) -> bool:
        if self.kind == "real":
            return abs(a - b) <= self.tolerance
        return a == b

    def finite_values(self) -> Optional[tuple]:
        """Values enumerable for loop assumptions; None if infinite."""
        if self.kind == "boolean":
            return (False, True)
        if self.kind == "enum":
            return self.symbols
        return None

    def to_json(self) -> Any:
        if self.kind == "enum":
            return {"enum": list(self.symbols)}
        if self.kind == "real":
            return {"real": {"tolerance": self.tolerance}}
        return self.kind

    @staticmethod
    def from_json(obj: Any, where: str) -> "Domain":
        if obj is None:
            return BOOLEAN
        if isinstance(obj, str):
            if obj in ("boolean", "integer"):
                return Domain(obj)
            if obj == "real":
                return Domain("real")
            raise ParseError(f"{where}: unknown domain {obj!r}")
        if isinstance(obj, dict):
            if "enum" in obj:
                symbols = tuple(obj["enum"])
                if not symbols:
                    raise ParseError(f"{where}: enum domain must not be empty")
                return Domain("enum", symbols=symbols)
            if "real" in obj:
                tol = float(obj["real"].get("tolerance", 0.0))
                if tol < 0:
                    raise ParseError(f"{where}: tolerance must be non-negative")
                return Domain("real", tolerance=tol)
        raise ParseError(f"{where}: malformed domain {obj!r}")


BOOLEAN = Domain("boolean")


@dataclass(frozen=True)
class Branch:
    guard: Expr
    expr: Expr
    reads: tuple[str, ...]


@dataclass(frozen=True)
class FunctionSpec:
    branches: tuple[Branch, ...]
    masking: frozenset[str] = frozenset()


@dataclass(frozen=True)
class StatefulSpec:
    delay: int = 1
    initial: Any = None
    has_initial: bool = False


@dataclass(frozen=True)
class Component:
    id: str
    inputs: tuple[str, ...]
    function: Optional[FunctionSpec]
    prior: float = DEFAULT_PRIOR
    is_source: bool = False
    domain: Domain = BOOLEAN
    stateful: Optional[StatefulSpec] = None


@dataclass(frozen=True)
class Observation:
    component: str
    time: int
    value: Any


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]
    loops: tuple[tuple[str, ...], ...]

    @property
    def ok(self) -> bool:
        return not self.violations


class SystemModel:
    """Immutable component graph with per-port wiring."""

    def __init__(
        self,
        components: Iterable[Component],
        connections: Mapping[tuple[str, str], str],
        observables: Iterable[str],
        epsilon: float = DEFAULT_EPSILON,
        time_horizon: Optional[int] = None,
    ):
        self.components: tuple[Component, ...] = tuple(components)
        self.connections: dict[tuple[str, str], str] = dict(connections)
        self.observables: frozenset[str] = frozenset(observables)
        self.epsilon = epsilon
        self.time_horizon = time_horizon
        self.by_id: dict[str, Component] = {c.id: c for c in self.components}
        self._feeders: dict[str, dict[str, str]] = {c.id: {} for c in self.components}
        for (cid, port), feeder in self.connections.items():
            self._feeders.setdefault(cid, {})[port] = feeder

    def __eq__(self, other):
        return (
            isinstance(other, SystemModel)
            and self.components == other.components
            and self.connections == other.connections
            and self.observables == other.observables
            and self.epsilon == other.epsilon
            and self.time_horizon == other.time_horizon
        )

    def feeders(self, cid: str) -> dict[str, str]:
        """Map from input port name to the feeding component id."""
        return self._feeders[cid]

    def is_temporal(self) -> bool:
        return any(c.stateful for c in self.components) or self.time_horizon is not None

    def sccs(self, include_stateful_edges: bool = False) -> list[list[str]]:
        """Strongly connected components, by default ignoring delayed edges.

        Returned in topological order of the condensation (feeders first).
        Iterative Tarjan; reverse finish order gives the condensation order.
        """
        succ: dict[str, list[str]] = {c.id: [] for c in self.components}
        for (cid, _port), feeder in sorted(self.connections.items()):
            comp = self.by_id[cid]
            if comp.stateful and not include_stateful_edges:
                continue
            if feeder in succ:
                succ[feeder].append(cid)

        index: dict[str, int] = {}
        lowlink: dict[str, int] = {}
        on_stack: set[str] = set()
        stack: list[str] = []
        result: list[list[str]] = []
        counter = [0]

        for root in [c.id for c in self.components]:
            if root in index:
                continue
            work = [(root, iter(succ[root]))]
            index[root] = lowlink[root] = counter[0]
            counter[0] += 1
            stack.append(root)
            on_stack.add(root)
            while work:
                node, it = work[-1]
                advanced = False
                for nxt in it:
                    if nxt not in index:
                        index[nxt] = lowlink[nxt] = counter[0]
                        counter[0] += 1
                        stack.append(nxt)
                        on_stack.add(nxt)
                        work.append((nxt, iter(succ[nxt])))
                        advanced = True
                        break
                    if nxt in on_stack:
                        lowlink[node] = min(lowlink[node], index[nxt])
                if advanced:
                    continue
                work.pop()
                if work:
                    parent = work[-1][0]
                    lowlink[parent] = min(lowlink[parent], lowlink[node])
                if lowlink[node] == index[node]:
                    scc = []
                    while True:
                        member = stack.pop()
                        on_stack.discard(member)
                        scc.append(member)
                        if member == node:
                            break
                    result.append(sorted(scc))
        # Tarjan emits SCCs in reverse topological order of the condensation.
        result.reverse()
        return result

    def loop_sccs(self) -> list[list[str]]:
        """SCCs that form combinational loops (size > 1 or a self edge)."""
        loops = []
        for scc in self.sccs():
            if len(scc) > 1:
                loops.append(scc)
            else:
                cid = scc[0]
                comp = self.by_id[cid]
                if comp.stateful:
                    continue
                if cid in self._feeders[cid].values():
                    loops.append(scc)
        return loops

    def to_json(self) -> dict:
        comps = []
        for c in self.components:
            entry: dict[str, Any] = {"id": c.id, "type": "source" if c.is_source else "function"}
            if not c.is_source:
                entry["inputs"] = list(c.inputs)
                fn: dict[str, Any] = {
                    "branches": [
                        {"guard": b.guard.src, "reads": list(b.reads), "expr": b.expr.src}
                        for b in c.function.branches
                    ]
                }
                if c.function.masking:
                    fn["masking"] = sorted(c.function.masking)
                entry["function"] = fn
            if c.prior != DEFAULT_PRIOR:
                entry["prior"] = c.prior
            if c.domain != BOOLEAN:
                entry["domain"] = c.domain.to_json()
            if c.stateful:
                st: dict[str, Any] = {"delay": c.stateful.delay}
                if c.stateful.has_initial:
                    st["initial"] = c.stateful.initial
                entry["stateful"] = st
            comps.append(entry)
        doc: dict[str, Any] = {
            "components": comps,
            "connections": [
                {"from": f"{feeder}.out", "to": f"{cid}.{port}"}
                for (cid, port), feeder in sorted(self.connections.items())
            ],
            "observables": sorted(self.observables),
        }
        if self.epsilon != DEFAULT_EPSILON:
            doc["epsilon"] = self.epsilon
        if self.time_horizon is not None:
            doc["time_horizon"] = self.time_horizon
        return doc


def serialize(model: SystemModel) -> str:
    return json.dumps(model.to_json(), indent=2, sort_keys=False)


def _parse_function(obj: Any, cid: str, inputs: tuple[str, ...]) -> FunctionSpec:
    if not isinstance(obj, dict) or "branches" not in obj:
        raise ParseError(f"component {cid!r}: function must declare branches")
    ports = set(inputs)
    branches = []
    for i, raw in enumerate(obj["branches"]):
        where = f"component {cid!r} branch {i}"
        try:
            guard = compile_source(raw.get("guard", "true"))
            expr = compile_source(raw["expr"])
        except KeyError:
            raise ParseError(f"{where}: missing expr") from None
        except ExpressionError as exc:
            raise ParseError(f"{where}: {exc}") from None
        mentions = guard.mentions | expr.mentions
        unknown = mentions - ports
        if unknown:
            raise ParseError(f"{where}: reads undeclared ports {sorted(unknown)}")
        reads = raw.get("reads")
        if reads is None:
            reads = sorted(mentions)
        elif not mentions <= set(reads):
            # extra read ports are allowed: they gate when the branch may
            # fire (a constant fallback still waits for its inputs)
            raise ParseError(
                f"{where}: reads {sorted(reads)} must cover the mentioned "
                f"ports {sorted(mentions)}"
            )
        bad_reads = set(reads) - ports
        if bad_reads:
            raise ParseError(f"{where}: reads unknown ports {sorted(bad_reads)}")
        branches.append(Branch(guard=guard, expr=expr, reads=tuple(reads)))
    if not branches:
        raise ParseError(f"component {cid!r}: function needs at least one branch")
    masking = frozenset(obj.get("masking", ()))
    bad = masking - ports
    if bad:
        raise ParseError(f"component {cid!r}: masking lists unknown ports {sorted(bad)}")
    return FunctionSpec(branches=tuple(branches), masking=masking)


def parse_model(text: str) -> SystemModel:
    """Parse and structurally check a model document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")

    components: list[Component] = []
    seen: set[str] = set()
    for raw in doc.get("components", []):
        cid = raw.get("id")
        if not cid or not isinstance(cid, str):
            raise ParseError("every component needs a non-empty string id")
        if cid in seen:
            raise ParseError(f"duplicate component id {cid!r}")
        if cid in KEYWORDS or "." in cid:
            raise ParseError(f"component id {cid!r} is reserved or contains '.'")
        seen.add(cid)
        ctype = raw.get("type", "function")
        domain = Domain.from_json(raw.get("domain"), f"component {cid!r}")
        prior = float(raw.get("prior", DEFAULT_PRIOR))
        stateful = None
        if raw.get("stateful"):
            st = raw["stateful"]
            stateful = StatefulSpec(
                delay=int(st.get("delay", 1)),
                initial=st.get("initial"),
                has_initial="initial" in st,
            )
        if ctype == "source":
            if raw.get("inputs"):
                raise ParseError(f"source {cid!r} must not declare inputs")
            components.append(
                Component(id=cid, inputs=(), function=None, prior=prior,
                          is_source=True, domain=domain, stateful=None)
            )
            continue
        if ctype != "function":
            raise ParseError(f"component {cid!r}: unknown type {ctype!r}")
        inputs = tuple(raw.get("inputs", ()))
        if len(set(inputs)) != len(inputs):
            raise ParseError(f"component {cid!r}: duplicate input port names")
        function = _parse_function(raw.get("function"), cid, inputs)
        components.append(
            Component(id=cid, inputs=inputs, function=function, prior=prior,
                      is_source=False, domain=domain, stateful=stateful)
        )

    ids = {c.id for c in components}
    connections: dict[tuple[str, str], str] = {}
    for raw in doc.get("connections", []):
        src = raw.get("from", "")
        dst = raw.get("to", "")
        feeder = src[:-4] if src.endswith(".out") else src
        if feeder not in ids:
            raise ParseError(f"connection from unknown component {src!r}")
        if "." not in dst:
            raise ParseError(f"connection target {dst!r} must be 'component.port'")
        cid, port = dst.split(".", 1)
        if cid not in ids:
            raise ParseError(f"connection to unknown component {dst!r}")
        comp = next(c for c in components if c.id == cid)
        if port not in comp.inputs:
            raise ParseError(f"connection to unknown port {dst!r}")
        if (cid, port) in connections:
            raise ParseError(f"port {dst!r} is fed by more than one output")
        connections[(cid, port)] = feeder

    observables = doc.get("observables")
    if observables is None:
        observables = sorted(ids)
    unknown_obs = set(observables) - ids
    if unknown_obs:
        raise ParseError(f"observables reference unknown components {sorted(unknown_obs)}")

    epsilon = float(doc.get("epsilon", DEFAULT_EPSILON))
    horizon = doc.get("time_horizon")
    return SystemModel(
        components=components,
        connections=connections,
        observables=observables,
        epsilon=epsilon,
        time_horizon=int(horizon) if horizon is not None else None,
    )


def validate(model: SystemModel) -> ValidationReport:
    """Check SystemModel invariants; loops are reported, not rejected."""
    violations: list[str] = []
    for comp in model.components:
        if not 0.0 < comp.prior < 1.0:
            violations.append(f"component {comp.id!r}: prior must lie in (0, 1)")
        if comp.is_source:
            if comp.stateful:
                violations.append(f"source {comp.id!r} must not be stateful")
            continue
        feeders = model.feeders(comp.id)
        read_ports = {p for b in comp.function.branches for p in b.reads}
        for port in comp.inputs:
            if port in read_ports and port not in feeders:
                violations.append(
                    f"component {comp.id!r}: read port {port!r} is not connected"
                )
        if comp.stateful and comp.stateful.delay < 1:
            violations.append(f"component {comp.id!r}: stateful delay must be >= 1")
    if not 0.0 < model.epsilon < 1.0:
        violations.append("epsilon must lie in (0, 1)")

    loops = tuple(tuple(scc) for scc in model.loop_sccs())
    temporal = model.is_temporal()
    for scc in loops:
        if temporal:
            violations.append(
                f"zero-delay loop {list(scc)} is not supported in a temporal model"
            )
            continue
        for cid in scc:
            if model.by_id[cid].domain.finite_values() is None:
                violations.append(
                    f"loop component {cid!r} needs a finite value domain "
                    "for assumption-based prediction"
                )
    return ValidationReport(violations=tuple(violations), loops=loops)


def parse_observations(text: str) -> list[Observation]:
    """Observation file: JSON array of {component, time, value}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(doc, list):
        raise ParseError("observations must be a JSON array")
    result = []
    for raw in doc:
        try:
            result.append(
                Observation(
                    component=raw["component"],
                    time=int(raw.get("time", 0)),
                    value=raw["value"],
                )
            )
        except (KeyError, TypeError):
            raise ParseError(f"malformed observation entry {raw!r}") from None
    return result
