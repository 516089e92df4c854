"""Forward prediction with dependency tracking.

Propagates values through the component graph in causal order and computes,
for every predicted output value, three nested dependency sets:

* dep        - components the value actually rests on (one concrete support,
               built from the fired branch and therefore a superset of the
               focused set),
* focused    - intersection over all minimal sufficient supports,
* mask_free  - focused support restricted to non-masking ports.

Loops are opened with assumptions on unknown in-loop wires; every value that
transitively used an assumed wire carries that assumption.  Dynamic models
are unrolled over discrete time; a stateful component reads its inputs at
t - delay.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, NamedTuple, Optional, Sequence

from . import exprs
from .model import (
    Component,
    Domain,
    FunctionSpec,
    Observation,
    SystemModel,
)


class PropagationError(Exception):
    """Base class for prediction failures."""


class MissingSourceError(PropagationError):
    pass


class UndeterminedError(PropagationError):
    """No branch can fire although all inputs are known: a modeling bug."""


class NonFiniteDomainError(PropagationError):
    """A loop assumption point has no finite value domain."""


class OscillationError(PropagationError):
    """Stateful loop prediction found no fixed point within max_iters."""


class TimedComponent(NamedTuple):
    component: str
    time: int

    def label(self) -> str:
        return self.component if self.time == 0 else f"{self.component}@{self.time}"


class Assumption(NamedTuple):
    wire: str
    time: int
    value: Any

    def label(self) -> str:
        import json as _json

        at = "" if self.time == 0 else f"@{self.time}"
        return f"output({self.wire}){at}={_json.dumps(self.value)}"


def member_sort_key(tc: TimedComponent) -> tuple:
    return (tc.time, tc.component)


def assumption_sort_key(a: Assumption) -> tuple:
    return (a.time, a.wire, repr(a.value))


EMPTY_TC: frozenset[TimedComponent] = frozenset()
EMPTY_AS: frozenset[Assumption] = frozenset()


@dataclass(frozen=True)
class DepSets:
    dep: frozenset[TimedComponent]
    focused: frozenset[TimedComponent]
    mask_free: frozenset[TimedComponent]
    assumptions: frozenset[Assumption] = EMPTY_AS


EMPTY_DEPS = DepSets(dep=EMPTY_TC, focused=EMPTY_TC, mask_free=EMPTY_TC)


@dataclass(frozen=True)
class Prediction:
    owner: TimedComponent
    value: Any
    deps: DepSets
    # True for the record seeded by an assumption: the value rests on the
    # assumption alone, so the component sets are empty.
    assumption_seed: bool = False


@dataclass(frozen=True)
class AssumptionCheck:
    """Looped-back re-prediction of an assumed wire."""

    assumption: Assumption
    value: Any
    deps: DepSets
    consistent: bool


@dataclass
class PredictionState:
    model: SystemModel
    predictions: dict[TimedComponent, tuple[Prediction, ...]]
    measured: dict[TimedComponent, Any]
    checks: tuple[AssumptionCheck, ...] = ()

    def single(self, component: str, time: int = 0) -> Prediction:
        preds = self.predictions[TimedComponent(component, time)]
        if len(preds) != 1:
            raise ValueError(f"{component}@{time} has {len(preds)} predictions")
        return preds[0]

    def all_predictions(self) -> list[Prediction]:
        out = []
        for owner in sorted(self.predictions, key=member_sort_key):
            out.extend(self.predictions[owner])
        return out


class EvalResult(NamedTuple):
    determined: bool
    value: Any
    gamma: tuple[frozenset[str], ...]
    non_masking: frozenset[str]
    fired_reads: frozenset[str]


def evaluate_component(
    function: FunctionSpec,
    inputs: Mapping[str, Any],
    domain: Optional[Domain] = None,
    tolerance: float = 0.0,
) -> EvalResult:
    """Fire the first satisfied branch and derive the minimal read sets.

    `gamma` holds every inclusion-minimal port subset that, given the known
    input values, suffices to determine the fired value (the branch firing
    order handles overlapping guards; value agreement is required for a
    branch to count as an alternative support).
    """
    known = set(inputs)
    fired_value: Any = None
    fired_reads: Optional[frozenset[str]] = None
    for branch in function.branches:
        reads = set(branch.reads)
        if not reads <= known:
            continue
        if exprs.evaluate(branch.guard, inputs, tolerance):
            fired_value = exprs.evaluate(branch.expr, inputs, tolerance)
            fired_reads = frozenset(branch.reads)
            break
    if fired_reads is None:
        return EvalResult(False, None, (), frozenset(), frozenset())

    equal = domain.equal if domain is not None else lambda a, b: a == b
    sufficient: list[frozenset[str]] = []
    for branch in function.branches:
        reads = set(branch.reads)
        if not reads <= known:
            continue
        if not exprs.evaluate(branch.guard, inputs, tolerance):
            continue
        if equal(exprs.evaluate(branch.expr, inputs, tolerance), fired_value):
            sufficient.append(frozenset(branch.reads))
    minimal: list[frozenset[str]] = []
    for cand in sorted(set(sufficient), key=lambda s: (len(s), sorted(s))):
        if not any(kept <= cand for kept in minimal):
            minimal.append(cand)
    all_ports = frozenset(p for b in function.branches for p in b.reads)
    non_masking = all_ports - function.masking
    return EvalResult(True, fired_value, tuple(minimal), non_masking, fired_reads)


class _PortOption(NamedTuple):
    value: Any
    deps: DepSets
    measured: bool


def _compatible(assumption_sets: Iterable[frozenset[Assumption]]) -> Optional[frozenset[Assumption]]:
    """Union assumption sets; None if two assume different values for a wire."""
    merged: dict[tuple[str, int], Assumption] = {}
    for aset in assumption_sets:
        for a in aset:
            key = (a.wire, a.time)
            prev = merged.get(key)
            if prev is None:
                merged[key] = a
            elif prev.value != a.value:
                return None
    return frozenset(merged.values())


class _Engine:
    """Shared propagation core for static and temporal prediction."""

    def __init__(self, model: SystemModel, observations: Iterable[Observation]):
        self.model = model
        self.measured: dict[TimedComponent, Any] = {}
        for obs in observations:
            owner = TimedComponent(obs.component, obs.time)
            comp = model.by_id.get(obs.component)
            if comp is None:
                raise PropagationError(f"observation of unknown component {obs.component!r}")
            if not comp.domain.contains(obs.value):
                raise PropagationError(
                    f"observed value {obs.value!r} outside the domain of {obs.component!r}"
                )
            self.measured[owner] = obs.value
        self.predictions: dict[TimedComponent, tuple[Prediction, ...]] = {}
        self.checks: list[AssumptionCheck] = []

    # -- input gathering -------------------------------------------------

    def port_options(self, comp: Component, time: int) -> Optional[dict[str, list[_PortOption]]]:
        """Available value alternatives per connected input port.

        Ports whose feeder is neither measured nor predicted yet are simply
        absent, which lets switch branches fire on partial inputs.  Returns
        None when a feeder exists but produced no prediction at the needed
        time (temporal warm-up).
        """
        feeders = self.model.feeders(comp.id)
        delay = comp.stateful.delay if comp.stateful else 0
        t_in = time - delay
        options: dict[str, list[_PortOption]] = {}
        for port, feeder in feeders.items():
            if t_in < 0:
                continue
            ftc = TimedComponent(feeder, t_in)
            if ftc in self.measured:
                options[port] = [_PortOption(self.measured[ftc], EMPTY_DEPS, True)]
            elif ftc in self.predictions:
                options[port] = [
                    _PortOption(p.value, p.deps, False) for p in self.predictions[ftc]
                ]
        return options

    # -- evaluation ------------------------------------------------------

    def evaluate_combos(
        self, comp: Component, time: int, options: dict[str, list[_PortOption]]
    ) -> Optional[list[Prediction]]:
        """Evaluate a component for every compatible input-family combo."""
        owner = TimedComponent(comp.id, time)
        ports = sorted(options)
        tol = max(
            (self.model.by_id[self.model.feeders(comp.id)[p]].domain.tolerance
             for p in ports),
            default=0.0,
        )
        results: list[Prediction] = []
        seen: set[tuple] = set()
        determined_any = False
        for combo in itertools.product(*(options[p] for p in ports)):
            assumptions = _compatible(opt.deps.assumptions for opt in combo)
            if assumptions is None:
                continue
            inputs = {p: opt.value for p, opt in zip(ports, combo)}
            ev = evaluate_component(comp.function, inputs, comp.domain, tol)
            if not ev.determined:
                continue
            determined_any = True
            by_port = dict(zip(ports, combo))
            pred = self._build_prediction(comp, owner, ev, by_port)
            key = (repr(pred.value), pred.deps.dep, pred.deps.focused,
                   pred.deps.mask_free, pred.deps.assumptions)
            if key not in seen:
                seen.add(key)
                results.append(pred)
        if not determined_any:
            return None
        return results

    def _build_prediction(
        self,
        comp: Component,
        owner: TimedComponent,
        ev: EvalResult,
        by_port: dict[str, _PortOption],
    ) -> Prediction:
        def unmeasured(port: str) -> bool:
            return not by_port[port].measured

        # dep: transitive support of the branch that actually fired
        dep = {owner}
        for port in ev.fired_reads:
            if unmeasured(port):
                dep |= by_port[port].deps.dep
        # focused: {owner} union intersection over the minimal supports
        focused_parts = []
        mask_free_parts = []
        for gamma in ev.gamma:
            delta: set[TimedComponent] = set()
            sigma: set[TimedComponent] = set()
            for port in gamma:
                if unmeasured(port):
                    delta |= by_port[port].deps.focused
                    if port in ev.non_masking:
                        sigma |= by_port[port].deps.mask_free
            focused_parts.append(delta)
            mask_free_parts.append(sigma)
        focused = {owner} | (
            set.intersection(*focused_parts) if focused_parts else set()
        )
        mask_free = {owner} | (
            set.intersection(*mask_free_parts) if mask_free_parts else set()
        )
        # assumptions actually used by the fired value
        assumptions = _compatible(
            by_port[p].deps.assumptions for p in ev.fired_reads if unmeasured(p)
        )
        return Prediction(
            owner=owner,
            value=ev.value,
            deps=DepSets(
                dep=frozenset(dep),
                focused=frozenset(focused),
                mask_free=frozenset(mask_free),
                assumptions=assumptions if assumptions is not None else EMPTY_AS,
            ),
        )

    # -- static propagation ----------------------------------------------

    def run_static(self) -> None:
        for comp in self.model.components:
            if comp.is_source and TimedComponent(comp.id, 0) not in self.measured:
                raise MissingSourceError(f"source {comp.id!r} has no observation")
        for scc in self.model.sccs():
            members = [self.model.by_id[cid] for cid in scc]
            if len(members) == 1 and members[0].id not in self.model.feeders(members[0].id).values():
                comp = members[0]
                if comp.is_source:
                    continue
                self._predict_acyclic(comp, 0)
            else:
                self._resolve_loop(members, 0)

    def _predict_acyclic(self, comp: Component, time: int) -> None:
        options = self.port_options(comp, time)
        preds = self.evaluate_combos(comp, time, options)
        if preds is None:
            raise UndeterminedError(
                f"no branch of {comp.id!r} can fire at t={time} "
                "(undetermined output value)"
            )
        self.predictions[TimedComponent(comp.id, time)] = tuple(preds)

    # -- loops -------------------------------------------------------------

    def _resolve_loop(self, members: list[Component], time: int) -> None:
        if self.model.is_temporal():
            raise PropagationError(
                f"zero-delay loop {sorted(c.id for c in members)} in a temporal model"
            )
        member_ids = [c.id for c in members]
        in_order = [c for c in self.model.components if c.id in set(member_ids)]
        pending = {c.id for c in in_order}
        assumed: list[str] = []

        while pending:
            progressed = False
            for comp in in_order:
                if comp.id not in pending:
                    continue
                owner = TimedComponent(comp.id, time)
                options = self.port_options(comp, time)
                preds = self.evaluate_combos(comp, time, options)
                if preds:
                    self.predictions[owner] = tuple(preds)
                    pending.discard(comp.id)
                    progressed = True
            if progressed:
                continue
            # stuck: open the loop at the first stuck component's unknown
            # in-loop input wire (declaration order on both)
            seeded = False
            for comp in in_order:
                if comp.id not in pending:
                    continue
                feeders = self.model.feeders(comp.id)
                for port in comp.inputs:
                    feeder = feeders.get(port)
                    if feeder is None or feeder not in pending:
                        continue
                    ftc = TimedComponent(feeder, time)
                    if ftc in self.measured or ftc in self.predictions:
                        continue
                    fcomp = self.model.by_id[feeder]
                    values = fcomp.domain.finite_values()
                    if values is None:
                        raise NonFiniteDomainError(
                            f"loop wire {feeder!r} has no finite value domain"
                        )
                    seeds = tuple(
                        Prediction(
                            owner=ftc,
                            value=v,
                            deps=DepSets(
                                dep=EMPTY_TC,
                                focused=EMPTY_TC,
                                mask_free=EMPTY_TC,
                                assumptions=frozenset({Assumption(feeder, time, v)}),
                            ),
                            assumption_seed=True,
                        )
                        for v in values
                    )
                    self.predictions[ftc] = seeds
                    pending.discard(feeder)
                    assumed.append(feeder)
                    seeded = True
                    break
                if seeded:
                    break
            if not seeded:
                raise UndeterminedError(
                    f"loop {sorted(pending)} cannot be resolved"
                )

        # looped-back consistency check per assumption point and family
        for wire in assumed:
            comp = self.model.by_id[wire]
            owner = TimedComponent(wire, time)
            options = self.port_options(comp, time)
            repreds = self.evaluate_combos(comp, time, options) or []
            for v in [p.value for p in self.predictions[owner]]:
                asm = Assumption(wire, time, v)
                for re in repreds:
                    joined = _compatible([re.deps.assumptions, frozenset({asm})])
                    if joined is None:
                        continue
                    deps = DepSets(
                        dep=re.deps.dep,
                        focused=re.deps.focused,
                        mask_free=re.deps.mask_free,
                        assumptions=joined,
                    )
                    self.checks.append(
                        AssumptionCheck(
                            assumption=asm,
                            value=re.value,
                            deps=deps,
                            consistent=comp.domain.equal(re.value, v),
                        )
                    )

    # -- temporal propagation ---------------------------------------------

    def run_temporal(self, horizon: int) -> None:
        for t in range(horizon + 1):
            for comp in self.model.components:
                if comp.is_source:
                    if TimedComponent(comp.id, t) not in self.measured:
                        raise MissingSourceError(
                            f"source {comp.id!r} has no observation at t={t} "
                            "(trace shorter than the required horizon)"
                        )
            for scc in self.model.sccs():
                for cid in scc:
                    comp = self.model.by_id[cid]
                    if comp.is_source:
                        continue
                    if len(scc) > 1 or cid in self.model.feeders(cid).values():
                        raise PropagationError(
                            f"zero-delay loop {scc} in a temporal model"
                        )
                    self._predict_temporal(comp, t)

    def _predict_temporal(self, comp: Component, time: int) -> None:
        owner = TimedComponent(comp.id, time)
        delay = comp.stateful.delay if comp.stateful else 0
        if time - delay < 0:
            if comp.stateful and comp.stateful.has_initial:
                self.predictions[owner] = (
                    Prediction(
                        owner=owner,
                        value=comp.stateful.initial,
                        deps=DepSets(
                            dep=frozenset({owner}),
                            focused=frozenset({owner}),
                            mask_free=frozenset({owner}),
                        ),
                    ),
                )
            return
        options = self.port_options(comp, time)
        connected = set(self.model.feeders(comp.id))
        if set(options) != connected:
            return  # an upstream value is not available yet (warm-up)
        preds = self.evaluate_combos(comp, time, options)
        if preds is None:
            raise UndeterminedError(
                f"no branch of {comp.id!r} can fire at t={time}"
            )
        self.predictions[owner] = tuple(preds)

    def state(self) -> PredictionState:
        return PredictionState(
            model=self.model,
            predictions=dict(self.predictions),
            measured=dict(self.measured),
            checks=tuple(self.checks),
        )


def forward_predict(model: SystemModel, observations: Iterable[Observation]) -> PredictionState:
    """Predict every reachable output value with its dependency sets.

    Dispatches per strongly connected component: acyclic parts are evaluated
    in causal order, static loops are opened with assumptions.  Models with
    stateful components are unrolled over the observed horizon.
    """
    obs = list(observations)
    engine = _Engine(model, obs)
    if model.is_temporal():
        horizon = model.time_horizon
        if horizon is None:
            horizon = max((o.time for o in obs), default=0)
        engine.run_temporal(horizon)
    else:
        engine.run_static()
    return engine.state()


def temporal_predict(
    model: SystemModel,
    observations: Iterable[Observation],
    sample_times: Optional[Sequence[int]] = None,
) -> PredictionState:
    """Time-indexed prediction; sample_times restricts the returned owners."""
    obs = list(observations)
    engine = _Engine(model, obs)
    horizon = model.time_horizon
    if horizon is None:
        horizon = max((o.time for o in obs), default=0)
    if sample_times:
        horizon = max(horizon, max(sample_times))
    engine.run_temporal(horizon)
    state = engine.state()
    if sample_times is not None:
        wanted = set(sample_times)
        state.predictions = {
            owner: preds
            for owner, preds in state.predictions.items()
            if owner.time in wanted
        }
    return state


def loop_predict_assumption(
    model: SystemModel,
    scc: Iterable[str],
    observations: Iterable[Observation],
) -> tuple[PredictionState, list[Prediction]]:
    """Assumption-based prediction for one loop; returns the loop members'
    predictions alongside the full state (which carries the loop-back checks).
    """
    state = forward_predict(model, observations)
    members = set(scc)
    preds = [
        p
        for owner, plist in sorted(state.predictions.items(), key=lambda kv: member_sort_key(kv[0]))
        for p in plist
        if owner.component in members
    ]
    return state, preds


def loop_predict_stateful(
    model: SystemModel,
    scc: Iterable[str],
    previous_state: Mapping[str, Any],
    observations: Iterable[Observation],
    max_iters: Optional[int] = None,
) -> dict[str, Prediction]:
    """Fixed-point prediction of a loop from its previous state.

    Performs synchronous sweeps: every loop member is re-evaluated against
    the previous sweep's values (previous_state for sweep one) until both
    values and dependency sets are stable.  Previous-state values act as
    known state and contribute no dependencies.
    """
    members = sorted(set(scc))
    for wire in members:
        if wire not in previous_state:
            raise PropagationError(f"previous_state misses loop wire {wire!r}")
    if max_iters is None:
        max_iters = 2 * len(members) + 2

    engine = _Engine(model, observations)
    # resolve everything upstream of the loop
    loop_set = set(members)
    for sccs in engine.model.sccs():
        if set(sccs) & loop_set:
            continue
        for cid in sccs:
            comp = engine.model.by_id[cid]
            if comp.is_source:
                if TimedComponent(cid, 0) not in engine.measured:
                    raise MissingSourceError(f"source {cid!r} has no observation")
                continue
            # skip anything downstream of the loop
            feeders = engine.model.feeders(cid).values()
            if any(f in loop_set for f in feeders):
                continue
            options = engine.port_options(comp, 0)
            if set(options) != set(engine.model.feeders(cid)):
                continue
            preds = engine.evaluate_combos(comp, 0, options)
            if preds:
                engine.predictions[TimedComponent(cid, 0)] = tuple(preds)

    current: dict[str, Prediction] = {
        wire: Prediction(
            owner=TimedComponent(wire, 0),
            value=previous_state[wire],
            deps=EMPTY_DEPS,
        )
        for wire in members
    }
    for _ in range(max_iters):
        for wire in members:
            engine.predictions[TimedComponent(wire, 0)] = (current[wire],)
        nxt: dict[str, Prediction] = {}
        for wire in members:
            comp = engine.model.by_id[wire]
            options = engine.port_options(comp, 0)
            preds = engine.evaluate_combos(comp, 0, options)
            if not preds:
                raise UndeterminedError(f"loop member {wire!r} is undetermined")
            if len(preds) != 1:
                raise PropagationError(
                    f"loop member {wire!r} produced {len(preds)} predictions"
                )
            nxt[wire] = preds[0]
        if all(
            engine.model.by_id[w].domain.equal(nxt[w].value, current[w].value)
            and nxt[w].deps == current[w].deps
            for w in members
        ):
            return nxt
        current = nxt
    raise OscillationError(
        f"loop {members} found no stable value/dependency fixed point "
        f"within {max_iters} sweeps"
    )


def enumerate_dep_sets(
    model: SystemModel,
    observations: Iterable[Observation],
    owner: str,
    limit: int = 10_000,
    time: int = 0,
) -> tuple[list[frozenset[TimedComponent]], bool]:
    """Brute-force enumeration of all minimal dependency sets of one owner.

    Test oracle for small loop-free models: walks every global choice of
    minimal sufficient supports and returns the distinct inclusion-minimal
    closure sets, with a truncation flag once `limit` is exceeded.
    """
    state = forward_predict(model, observations)
    gammas: dict[str, list[frozenset[str]]] = {}
    values: dict[str, Any] = {}
    for comp in model.components:
        tc = TimedComponent(comp.id, time)
        if comp.is_source:
            continue
        inputs = {}
        for port, feeder in model.feeders(comp.id).items():
            ftc = TimedComponent(feeder, time)
            if ftc in state.measured:
                inputs[port] = state.measured[ftc]
            elif ftc in state.predictions:
                inputs[port] = state.predictions[ftc][0].value
        ev = evaluate_component(comp.function, inputs, comp.domain)
        if not ev.determined:
            continue
        values[comp.id] = ev.value
        # translate port subsets to unmeasured feeder component subsets
        feeders = model.feeders(comp.id)
        supports = set()
        for g in ev.gamma:
            supports.add(
                frozenset(
                    feeders[p]
                    for p in g
                    if TimedComponent(feeders[p], time) not in state.measured
                )
            )
        minimal = []
        for cand in sorted(supports, key=lambda s: (len(s), sorted(s))):
            if not any(kept <= cand for kept in minimal):
                minimal.append(cand)
        gammas[comp.id] = minimal

    results: set[frozenset[TimedComponent]] = set()
    truncated = False

    def expand(assigned: dict[str, frozenset[str]], members: set[str]) -> None:
        nonlocal truncated
        if truncated:
            return
        unassigned = sorted(m for m in members if m not in assigned)
        if not unassigned:
            results.add(frozenset(TimedComponent(m, time) for m in members))
            if len(results) > limit:
                truncated = True
            return
        target = unassigned[0]
        for choice in gammas.get(target, [frozenset()]):
            expand({**assigned, target: choice}, members | set(choice))

    expand({}, {owner})
    sets = sorted(results, key=lambda s: (len(s), sorted(member_sort_key(m) for m in s)))
    minimal_sets: list[frozenset[TimedComponent]] = []
    for cand in sets:
        if not any(kept <= cand for kept in minimal_sets):
            minimal_sets.append(cand)
    return minimal_sets[:limit], truncated
