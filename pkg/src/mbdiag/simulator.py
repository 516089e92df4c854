"""Closed-loop evaluation: fault injection, probe oracle, seeded sweeps.

The simulator plays the role of the physical system: it computes the faulty
circuit's true outputs and answers probe requests from them, driving the
predict -> classify -> focus -> advise loop until diagnosis.  It also hosts
the brute-force oracles (exact minimal hitting sets, minimal-diagnosis
enumeration) used to validate the focusing approximations on small
instances.
"""

from __future__ import annotations

import itertools
import json
import random
import time as time_mod
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence

from . import engine as _engine
from .engine import (
    STATUS_DIAGNOSED,
    STATUS_EXHAUSTED,
    STATUS_INCONSISTENT,
    diagnose_once,
)
from .exprs import compile_source
from .model import (
    Branch,
    Component,
    FunctionSpec,
    Observation,
    SystemModel,
)
from .propagation import TimedComponent, evaluate_component


class SimulationError(Exception):
    pass


@dataclass(frozen=True)
class FaultSpec:
    component: str
    kind: str  # "stuck_at" | "function_override" | "intermittent_stuck_at"
    value: Any = None
    function: Optional[FunctionSpec] = None
    active_times: frozenset[int] = frozenset()

    @staticmethod
    def stuck_at(component: str, value: Any) -> "FaultSpec":
        return FaultSpec(component=component, kind="stuck_at", value=value)

    @staticmethod
    def override(component: str, function: FunctionSpec) -> "FaultSpec":
        return FaultSpec(component=component, kind="function_override", function=function)

    @staticmethod
    def intermittent(component: str, value: Any, active_times: Iterable[int]) -> "FaultSpec":
        return FaultSpec(
            component=component, kind="intermittent_stuck_at", value=value,
            active_times=frozenset(active_times),
        )


@dataclass(frozen=True)
class FaultyModel:
    model: SystemModel
    timed_overrides: dict = field(default_factory=dict)  # (component, time) -> value


def _literal(value: Any) -> str:
    return json.dumps(value)


def _constant_function(value: Any) -> FunctionSpec:
    return FunctionSpec(
        branches=(Branch(guard=compile_source("true"),
                         expr=compile_source(_literal(value)),
                         reads=()),),
    )


def inject(
    model: SystemModel,
    faults: Iterable[FaultSpec],
    allow_source_faults: bool = False,
) -> FaultyModel:
    """Apply faults to a copy of the model; the original stays untouched."""
    faults = list(faults)
    ids = [f.component for f in faults]
    if len(set(ids)) != len(ids):
        raise SimulationError("faults must target distinct components")
    by_component = {f.component: f for f in faults}
    timed: dict[tuple[str, int], Any] = {}
    components = []
    for comp in model.components:
        fault = by_component.pop(comp.id, None)
        if fault is None:
            components.append(comp)
            continue
        if comp.is_source and not allow_source_faults:
            raise SimulationError(
                f"fault on source {comp.id!r} (pass allow_source_faults to permit)"
            )
        if fault.kind == "stuck_at":
            if not comp.domain.contains(fault.value):
                raise SimulationError(
                    f"stuck-at value {fault.value!r} outside domain of {comp.id!r}"
                )
            components.append(
                Component(
                    id=comp.id, inputs=comp.inputs,
                    function=_constant_function(fault.value),
                    prior=comp.prior, is_source=False, domain=comp.domain,
                    stateful=None,
                )
            )
        elif fault.kind == "function_override":
            components.append(
                Component(
                    id=comp.id, inputs=comp.inputs, function=fault.function,
                    prior=comp.prior, is_source=comp.is_source,
                    domain=comp.domain, stateful=comp.stateful,
                )
            )
        elif fault.kind == "intermittent_stuck_at":
            if not comp.domain.contains(fault.value):
                raise SimulationError(
                    f"stuck-at value {fault.value!r} outside domain of {comp.id!r}"
                )
            components.append(comp)
            for t in fault.active_times:
                timed[(comp.id, t)] = fault.value
        else:
            raise SimulationError(f"unknown fault kind {fault.kind!r}")
    if by_component:
        raise SimulationError(
            f"faults target unknown components {sorted(by_component)}"
        )
    faulty = SystemModel(
        components=components,
        connections=model.connections,
        observables=model.observables,
        epsilon=model.epsilon,
        time_horizon=model.time_horizon,
    )
    return FaultyModel(model=faulty, timed_overrides=timed)


def ground_truth(
    faulty: FaultyModel,
    source_observations: Iterable[Observation],
    horizon: Optional[int] = None,
) -> dict[TimedComponent, Any]:
    """Concrete evaluation of the faulty system: the probe oracle.

    All values are computed in causal order with full knowledge; timed
    overrides force intermittent stuck values at their active times.
    """
    model = faulty.model
    obs = list(source_observations)
    values: dict[TimedComponent, Any] = {}
    for o in obs:
        values[TimedComponent(o.component, o.time)] = o.value
    if horizon is None:
        horizon = model.time_horizon
        if horizon is None:
            horizon = max((o.time for o in obs), default=0)
    temporal = model.is_temporal()
    times = range(horizon + 1) if temporal else (0,)
    order = [cid for scc in model.sccs() for cid in scc]
    for t in times:
        for cid in order:
            comp = model.by_id[cid]
            tc = TimedComponent(cid, t)
            if comp.is_source:
                if tc not in values:
                    raise SimulationError(f"missing source value for {cid!r} at t={t}")
                continue
            if (cid, t) in faulty.timed_overrides:
                values[tc] = faulty.timed_overrides[(cid, t)]
                continue
            delay = comp.stateful.delay if comp.stateful else 0
            t_in = t - delay
            if t_in < 0:
                if comp.stateful and comp.stateful.has_initial:
                    values[tc] = comp.stateful.initial
                continue
            inputs = {}
            missing = False
            for port, feeder in model.feeders(cid).items():
                ftc = TimedComponent(feeder, t_in)
                if ftc not in values:
                    missing = True
                    break
                inputs[port] = values[ftc]
            if missing:
                if temporal:
                    continue
                raise SimulationError(f"cannot evaluate {cid!r}: loop or missing input")
            ev = evaluate_component(comp.function, inputs, comp.domain)
            if not ev.determined:
                raise SimulationError(f"no branch of {cid!r} fires in the faulty system")
            values[tc] = ev.value
    return values


# -- session loop -----------------------------------------------------------


@dataclass
class SessionStep:
    prediction_count: int
    evidence: list[dict]
    focuses: dict
    advice: Optional[dict]
    measurement: Optional[dict]


@dataclass
class SessionTranscript:
    steps: list[SessionStep]
    outcome: str  # "diagnosed" | "exhausted" | "inconsistent"
    diagnosed: tuple[str, ...]
    probe_count: int

    def to_json(self) -> dict:
        return {
            "steps": [
                {
                    "prediction_count": s.prediction_count,
                    "evidence": s.evidence,
                    "focuses": s.focuses,
                    "advice": s.advice,
                    "measurement": s.measurement,
                }
                for s in self.steps
            ],
            "outcome": self.outcome,
            "diagnosed": list(self.diagnosed),
            "probe_count": self.probe_count,
        }


def run_session(
    model: SystemModel,
    faulty: FaultyModel,
    rule: str = "r1",
    mode: str = "nonintermittent",
    strategy: str = "entropy",
    initial_observations: Iterable[Observation] = (),
) -> SessionTranscript:
    """Drive predict -> classify -> focus -> advise -> measure to termination.

    Measurements are answered from the faulty system's ground truth; the
    loop ends when every focus is a single component (diagnosed), no probe
    splits any focus (exhausted), or the evidence is inconsistent.
    """
    observations = list(initial_observations)
    truth = ground_truth(
        faulty,
        [o for o in observations if model.by_id[o.component].is_source],
    )
    steps: list[SessionStep] = []
    probe_count = 0
    measured = {(o.component, o.time) for o in observations}
    for _ in range(len(model.components) + 1):
        view = diagnose_once(model, observations, rule, mode, strategy)
        step = SessionStep(
            prediction_count=len(view.state.predictions) if view.state else 0,
            evidence=[_engine.evidence_json(e) for e in view.evidence],
            focuses=_engine.focuses_json(view.focuses, view.rule_used, mode),
            advice=view.advice.to_json() if view.advice else None,
            measurement=None,
        )
        steps.append(step)
        if view.status == STATUS_DIAGNOSED:
            return SessionTranscript(steps, "diagnosed", view.diagnosed, probe_count)
        if view.status == STATUS_INCONSISTENT:
            return SessionTranscript(steps, "inconsistent", (), probe_count)
        if view.status == STATUS_EXHAUSTED or view.advice is None:
            return SessionTranscript(steps, "exhausted", (), probe_count)
        target = (view.advice.probe, view.advice.time)
        if target in measured:
            # a repeated probe would loop forever; treat as exhausted
            return SessionTranscript(steps, "exhausted", (), probe_count)
        value = truth[TimedComponent(*target)]
        observations.append(Observation(target[0], target[1], value))
        measured.add(target)
        probe_count += 1
        step.measurement = {"component": target[0], "time": target[1], "value": value}
    raise SimulationError("session failed to terminate within the probe budget")


# -- brute-force oracles ------------------------------------------------------


def minimal_hitting_set(sets: Sequence[Iterable]) -> tuple[int, frozenset]:
    """Exact minimum hitting set by exhaustive search (test oracle).

    Returns (size, lexicographically smallest witness of that size).
    Limited to 20 distinct members.
    """
    families = [frozenset(s) for s in sets if s]
    if not families:
        return 0, frozenset()
    universe = sorted({m for s in families for m in s}, key=repr)
    if len(universe) > 20:
        raise SimulationError("hitting-set oracle limited to 20 members")
    for size in range(1, len(universe) + 1):
        for combo in itertools.combinations(universe, size):
            chosen = frozenset(combo)
            if all(chosen & s for s in families):
                return size, chosen
    return len(universe), frozenset(universe)


def enumerate_minimal_hitting_sets(sets: Sequence[Iterable]) -> list[frozenset]:
    """All inclusion-minimal hitting sets (candidate minimal diagnoses)."""
    families = [frozenset(s) for s in sets if s]
    if not families:
        return []
    universe = sorted({m for s in families for m in s}, key=repr)
    if len(universe) > 16:
        raise SimulationError("diagnosis enumeration limited to 16 members")
    hitting: list[frozenset] = []
    for size in range(1, len(universe) + 1):
        for combo in itertools.combinations(universe, size):
            chosen = frozenset(combo)
            if any(kept <= chosen for kept in hitting):
                continue
            if all(chosen & s for s in families):
                hitting.append(chosen)
    return hitting


# -- model generators ---------------------------------------------------------

_TOTAL_GATES = {
    "xor": "x != y",
    "xnor": "x == y",
}


def _gate(kind: str, n_inputs: int) -> FunctionSpec:
    """Boolean gate with explicit switch branches where they exist."""
    ports = [f"i{k}" for k in range(n_inputs)]
    branches: list[Branch] = []

    def branch(guard: str, expr: str) -> Branch:
        return Branch(guard=compile_source(guard), expr=compile_source(expr),
                      reads=tuple(sorted(compile_source(guard).mentions
                                         | compile_source(expr).mentions)))

    if kind in ("and", "nand"):
        absorbed = "false" if kind == "and" else "true"
        for p in ports:
            branches.append(branch(f"{p} == false", absorbed))
        full = " and ".join(ports)
        expr = full if kind == "and" else f"not ({full})"
        branches.append(branch("true", expr))
    elif kind in ("or", "nor"):
        absorbed = "true" if kind == "or" else "false"
        for p in ports:
            branches.append(branch(f"{p} == true", absorbed))
        full = " or ".join(ports)
        expr = full if kind == "or" else f"not ({full})"
        branches.append(branch("true", expr))
    elif kind == "not":
        branches.append(branch("true", f"not {ports[0]}"))
    elif kind == "buf":
        branches.append(branch("true", ports[0]))
    elif kind in _TOTAL_GATES:
        if n_inputs != 2:
            raise SimulationError(f"{kind} gate needs exactly two inputs")
        branches.append(branch("true", _TOTAL_GATES[kind].replace("x", ports[0]).replace("y", ports[1])))
    else:
        raise SimulationError(f"unknown gate kind {kind!r}")
    return FunctionSpec(branches=tuple(branches))


def gate_component(cid: str, kind: str, n_inputs: int, prior: float = 1e-4) -> Component:
    return Component(
        id=cid,
        inputs=tuple(f"i{k}" for k in range(n_inputs)),
        function=_gate(kind, n_inputs),
        prior=prior,
        is_source=False,
    )


_GATE_MIX = ("and", "or", "nand", "nor", "xor", "buf", "not")


def generate_model(
    family: str, n: int, k: int = 2, seed: int = 0, n_sources: Optional[int] = None
) -> SystemModel:
    """Seeded random model families: chain, tree, dag (fan-in bounded by k)."""
    rng = random.Random(seed)
    components: list[Component] = []
    connections: dict[tuple[str, str], str] = {}

    if family == "chain":
        components.append(Component(id="s0", inputs=(), function=None, is_source=True))
        prev = "s0"
        for i in range(n):
            cid = f"g{i}"
            kind = rng.choice(("buf", "not"))
            components.append(gate_component(cid, kind, 1))
            connections[(cid, "i0")] = prev
            prev = cid
        return SystemModel(components, connections, [c.id for c in components])

    if family == "tree":
        # binary-ish tree reduced toward a root output
        n_sources = n_sources or max(2, (n + 1) // 2 + 1)
        frontier = []
        for i in range(n_sources):
            sid = f"s{i}"
            components.append(Component(id=sid, inputs=(), function=None, is_source=True))
            frontier.append(sid)
        i = 0
        while len(frontier) > 1 and i < n:
            cid = f"g{i}"
            fan = min(len(frontier), rng.randint(2, max(2, k)))
            feeders = [frontier.pop(0) for _ in range(fan)]
            kind = rng.choice(("and", "or", "nand", "nor"))
            components.append(gate_component(cid, kind, fan))
            for j, f in enumerate(feeders):
                connections[(cid, f"i{j}")] = f
            frontier.append(cid)
            i += 1
        return SystemModel(components, connections, [c.id for c in components])

    if family == "dag":
        n_sources = n_sources or max(2, n // 5)
        pool = []
        for i in range(n_sources):
            sid = f"s{i}"
            components.append(Component(id=sid, inputs=(), function=None, is_source=True))
            pool.append(sid)
        for i in range(n):
            cid = f"g{i}"
            fan = rng.randint(1, max(1, k))
            fan = min(fan, len(pool))
            feeders = rng.sample(pool, fan)
            if fan == 1:
                kind = rng.choice(("buf", "not"))
            elif fan == 2 and rng.random() < 0.25:
                kind = "xor"
            else:
                kind = rng.choice(("and", "or", "nand", "nor"))
            components.append(gate_component(cid, kind, fan))
            for j, f in enumerate(feeders):
                connections[(cid, f"i{j}")] = f
            pool.append(cid)
        return SystemModel(components, connections, [c.id for c in components])

    raise SimulationError(f"unknown model family {family!r}")


def random_source_observations(model: SystemModel, rng: random.Random) -> list[Observation]:
    return [
        Observation(c.id, 0, rng.random() < 0.5)
        for c in model.components
        if c.is_source
    ]


def sink_components(model: SystemModel) -> list[str]:
    fed = {feeder for feeder in model.connections.values()}
    return sorted(c.id for c in model.components if not c.is_source and c.id not in fed)


@dataclass
class SweepRow:
    seed: int
    n: int
    k: int
    rule: str
    strategy: str
    probes: int
    correct: bool
    rule_micros: float
    outcome: str
    injected: tuple[str, ...] = ()
    diagnosed: tuple[str, ...] = ()

    def csv(self) -> str:
        return (
            f"{self.seed},{self.n},{self.k},{self.rule},{self.strategy},"
            f"{self.probes},{int(self.correct)},{self.rule_micros:.1f}"
        )


CSV_HEADER = "seed,n,k,rule,strategy,probes,correct,rule_micros"


def _detectable_fault(
    model: SystemModel, rng: random.Random, n_faults: int
) -> Optional[tuple[list[Observation], list[FaultSpec], FaultyModel]]:
    """Sample (inputs, faults) until a system output actually deviates.

    A fault that never reaches a system output produces no evidence at all,
    so no diagnostic method could name it; sweeps quantify over faults that
    are detectable at the initially observed outputs.
    """
    from .propagation import forward_predict

    gates = [c.id for c in model.components if not c.is_source]
    sinks = sink_components(model)
    for _ in range(60):
        sources = random_source_observations(model, rng)
        targets = rng.sample(gates, min(n_faults, len(gates)))
        faults = [FaultSpec.stuck_at(t, rng.random() < 0.5) for t in targets]
        faulty = inject(model, faults)
        healthy = ground_truth(FaultyModel(model=model), sources)
        broken = ground_truth(faulty, sources)
        if not any(
            healthy[TimedComponent(c, 0)] != broken[TimedComponent(c, 0)]
            for c in sinks
        ):
            continue
        # mask-free instance: every output that (mask-free) depends on a
        # faulty component must actually deviate; reconvergent cancellation
        # would otherwise let a confirmation vouch for the broken part
        # (subsystem-level masking, which the forward approximation ignores)
        state = forward_predict(model, sources)
        fault_ids = {f.component for f in faults}
        masked = False
        for comp in model.components:
            if comp.is_source:
                continue
            owner = TimedComponent(comp.id, 0)
            if broken[owner] != healthy[owner]:
                continue
            deps = {tc.component for tc in state.predictions[owner][0].deps.mask_free}
            if deps & fault_ids:
                masked = True
                break
        if not masked:
            return sources, faults, faulty
    return None


def sweep(
    family: str,
    n: int,
    k: int = 2,
    runs: int = 100,
    faults_per_run: int = 1,
    rule: str = "r1",
    strategy: str = "halving",
    seed: int = 0,
) -> list[SweepRow]:
    """Seeded batch of closed-loop sessions with aggregate metrics.

    Collects exactly `runs` instances, skipping seeds where no detectable
    mask-free fault sample exists for the generated model.
    """
    rows: list[SweepRow] = []
    attempts = 0
    while len(rows) < runs and attempts < runs * 4:
        run_seed = seed + attempts
        attempts += 1
        rng = random.Random(run_seed)
        model = generate_model(family, n, k, seed=run_seed)
        sample = _detectable_fault(model, rng, faults_per_run)
        if sample is None:
            continue
        sources, faults, faulty = sample
        truth = ground_truth(faulty, sources)
        initial = list(sources) + [
            Observation(c, 0, truth[TimedComponent(c, 0)])
            for c in sink_components(model)
        ]
        transcript = run_session(
            model, faulty, rule=rule, strategy=strategy,
            initial_observations=initial,
        )
        injected = tuple(sorted(f.component for f in faults))
        correct = transcript.outcome == "diagnosed" and tuple(
            sorted(transcript.diagnosed)
        ) == injected
        # time the focusing rule alone on this run's first evidence
        from . import focusing as _focusing
        from .propagation import forward_predict as _fp

        state = _fp(model, initial)
        evidence = _focusing.classify(state, initial)
        t0 = time_mod.perf_counter()
        try:
            _focusing.apply_rule(rule, evidence)
        except _focusing.InconsistentEvidenceError:
            pass
        micros = (time_mod.perf_counter() - t0) * 1e6
        rows.append(
            SweepRow(
                seed=run_seed, n=n, k=k, rule=rule, strategy=strategy,
                probes=transcript.probe_count, correct=correct,
                rule_micros=micros, outcome=transcript.outcome,
                injected=injected, diagnosed=tuple(sorted(transcript.diagnosed)),
            )
        )
    return rows
