"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
report.  Tolerances and thresholds are pinned here, not configurable.
"""

import json
import random
import statistics
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbdiag import focusing
from mbdiag.engine import diagnose_once
from mbdiag.focusing import (
    EvidenceSet,
    classify,
    focus_rule1,
    focus_rule2,
    focus_rule3,
    focus_rule4,
    cancelled,
)
from mbdiag.model import Observation
from mbdiag.probing import (
    prob_any_broken,
    select_probe_entropy,
    select_probe_halving,
)
from mbdiag.propagation import (
    TimedComponent,
    enumerate_dep_sets,
    forward_predict,
    loop_predict_stateful,
)
from mbdiag.simulator import (
    FaultSpec,
    FaultyModel,
    enumerate_minimal_hitting_sets,
    generate_model,
    ground_truth,
    inject,
    minimal_hitting_set,
    random_source_observations,
    run_session,
    sink_components,
    sweep,
)

from conftest import (
    FLIPFLOP_EVIDENCE,
    FLIPFLOP_INPUTS,
    FULLADDER_EVIDENCE,
    FULLADDER_INPUTS,
    components,
    load_model,
    obs,
)


def report(name: str):
    print(f"\nACCEPTANCE PASS: {name}")


def tc(cid, t=0):
    return TimedComponent(cid, t)


# -- criterion 1: full-adder regression ---------------------------------------


def test_fulladder_regression():
    model = load_model("fulladder")
    observations = obs(*FULLADDER_EVIDENCE)
    started = time.perf_counter()

    state = forward_predict(model, observations)
    table = {
        cid: frozenset(components(state.single(cid).deps.focused))
        for cid in ("and1", "xor1", "and2", "xor2", "or1")
    }
    evidence = classify(state, observations)
    focuses = focus_rule2(evidence)
    priors = {c.id: c.prior for c in model.components}
    focus = focuses.focuses[0]
    entropy_advice = select_probe_entropy(focus, state, priors)
    halving_advice = select_probe_halving(focus, state)

    elapsed = time.perf_counter() - started

    assert table == {
        "and1": frozenset({"and1"}),
        "xor1": frozenset({"xor1"}),
        "and2": frozenset({"and2", "xor1"}),
        "xor2": frozenset({"xor1", "xor2"}),
        "or1": frozenset({"or1", "and2", "xor1"}),
    }
    assert [f.labels() for f in focuses] == [["and2", "or1"]]
    assert entropy_advice.probe == "and2"
    assert halving_advice.probe == "and2"
    assert elapsed < 0.010, f"pipeline took {elapsed * 1000:.2f} ms"
    report("full-adder regression (dep table, rule-2 focus, both probes, <10ms)")


# -- criterion 2: generator scenarios -----------------------------------------


def test_generator_scenarios():
    model = load_model("generators")

    def rule1_focuses(observations):
        state = forward_predict(model, observations)
        evidence = classify(state, observations)
        return sorted(tuple(f.labels()) for f in focus_rule1(evidence))

    confirm_cd = rule1_focuses(obs(("c", 0, True), ("d", 0, True), ("e", 0, False)))
    assert confirm_cd == [("b", "e")]
    conflict_d = rule1_focuses(obs(("c", 0, True), ("d", 0, False), ("e", 0, False)))
    assert conflict_d == [("b",)]
    conflict_cd = rule1_focuses(obs(("c", 0, False), ("d", 0, False), ("e", 0, False)))
    assert conflict_cd == [("b",), ("c",)]
    report("generator scenarios ({b,e}; {b}; {b} and {c})")


# -- criterion 3: flipflop loop ------------------------------------------------


def test_flipflop_loop():
    model = load_model("flipflop")
    inputs = obs(*FLIPFLOP_INPUTS)
    state = forward_predict(model, inputs)

    rows = set()
    for owner in state.predictions:
        for pred in state.predictions[owner]:
            rows.add((
                owner.component,
                pred.value,
                frozenset(components(pred.deps.focused)),
                frozenset(a.label() for a in pred.deps.assumptions),
            ))
    asm0 = frozenset({"output(nand5)=false"})
    asm1 = frozenset({"output(nand5)=true"})
    none = frozenset()
    expected = {
        ("inv1", True, frozenset({"inv1"}), none),
        ("nand2", True, frozenset({"nand2"}), none),
        ("nand3", True, frozenset({"nand3"}), none),
        ("nand4", True, frozenset({"nand4"}), asm0),
        ("nand4", False, frozenset({"nand2", "nand4"}), asm1),
        ("nand5", False, frozenset(), asm0),
        ("nand5", True, frozenset(), asm1),
        ("and6", True, frozenset({"nand4", "and6"}), asm0),
        ("and6", False, frozenset({"nand2", "nand4", "and6"}), asm1),
        ("and7", False, frozenset({"and7"}), asm0),
        ("and7", True, frozenset({"and7"}), asm1),
    }
    assert rows == expected
    assert len(rows) == 11

    measurements = obs(*FLIPFLOP_EVIDENCE)
    state2 = forward_predict(model, measurements)
    evidence = classify(state2, measurements)
    focuses = focus_rule2(evidence)
    assert [f.labels() for f in focuses] == [
        ["output(nand5)=false"], ["output(nand5)=true"]]

    after = measurements + obs(("nand5", 0, True))
    state3 = forward_predict(model, after)
    evidence3 = classify(state3, after)
    focuses3 = focus_rule2(evidence3)
    assert [f.labels() for f in focuses3] == [["and7"]]
    report("flipflop loop (11-row table, assumption focuses, nand5=1 -> {and7})")


# -- criterion 4: delay cancellation -------------------------------------------


def test_delay_cancellation():
    model = load_model("delay")
    traces = obs(*[(s, t, True) for s in ("s1", "s2") for t in range(5)])
    faulty = inject(model, [FaultSpec.stuck_at("b", False)])
    truth = ground_truth(faulty, traces)

    # conflict on d at t=1, confirmation on c at t=2 (whose set holds <a,1>)
    measurements = traces + obs(("d", 1, truth[tc("d", 1)]),
                                ("c", 2, truth[tc("c", 2)]))
    state = forward_predict(model, measurements)
    evidence = classify(state, measurements)
    kf = next(e for e in evidence if e.kind == "conflict")
    confirmations = [e for e in evidence if e.kind == "confirmation"]
    assert kf.origin == tc("d", 1)
    assert kf.focused_members == frozenset({tc("a", 1), tc("b", 1), tc("d", 1)})
    assert cancelled("a", kf, confirmations, "nonintermittent")
    assert cancelled("a", kf, confirmations, "intermittent")

    # shifted variant: confirmation holds <a,2> against conflict entry <a,1>
    shifted = traces + obs(("d", 1, truth[tc("d", 1)]),
                           ("c", 3, truth[tc("c", 3)]))
    state2 = forward_predict(model, shifted)
    evidence2 = classify(state2, shifted)
    kf2 = next(e for e in evidence2 if e.kind == "conflict")
    confs2 = [e for e in evidence2 if e.kind == "confirmation"]
    assert confs2[0].members == frozenset({tc("a", 2), tc("c", 3)})
    assert cancelled("a", kf2, confs2, "nonintermittent")
    assert not cancelled("a", kf2, confs2, "intermittent")
    report("delay cancellation (both modes; shifted time splits the modes)")


# -- criterion 5: bulb-circuit plausibility -------------------------------------


def test_bulb_circuit_plausibility():
    model = load_model("bulbs")
    faulty = inject(model, [FaultSpec.stuck_at("bulb1", False),
                            FaultSpec.stuck_at("bulb2", False)])
    truth = ground_truth(faulty, [])
    measurements = [Observation(b, 0, truth[tc(b)])
                    for b in ("bulb1", "bulb2", "bulb3")]
    state = forward_predict(model, measurements)
    evidence = classify(state, measurements)
    focuses = focus_rule1(evidence)
    assert sorted(tuple(f.labels()) for f in focuses) == [("bulb1",), ("bulb2",)]
    assert len(focuses) == 2

    # without confirmation reasoning: enumerate minimal diagnoses over the
    # raw conflict sets; the implausible psu diagnosis is among them
    conflicts = [frozenset(components(e.members))
                 for e in evidence if e.kind == "conflict"]
    diagnoses = enumerate_minimal_hitting_sets(conflicts)
    assert len(diagnoses) > 1
    assert frozenset({"psu"}) in diagnoses
    # the focus-based diagnosis is the plausible one and only it survives
    assert frozenset({"bulb1", "bulb2"}) in diagnoses
    plausible = {m for f in focuses for m in components(f.members)}
    assert plausible == {"bulb1", "bulb2"}
    report("bulb circuit (2 plausible focuses; >1 unfocused minimal diagnosis)")


# -- criterion 6: hitting-set bound ---------------------------------------------


def test_hitting_set_bound():
    instances = 0
    candidates_checked = 0
    seed = 0
    picker = random.Random(202)
    while instances < 200:
        seed += 1
        n = picker.randint(4, 10)
        model = generate_model("dag", n, k=2, seed=seed)
        rng = random.Random(seed)
        gates = [c.id for c in model.components if not c.is_source]
        sources = random_source_observations(model, rng)
        targets = rng.sample(gates, min(rng.choice([1, 1, 2]), len(gates)))
        faults = [FaultSpec.stuck_at(t, rng.random() < 0.5) for t in targets]
        faulty = inject(model, faults)
        truth = ground_truth(faulty, sources)
        measured = set(sink_components(model)) | {
            g for g in gates if rng.random() < 0.4}
        measurements = sources + [
            Observation(g, 0, truth[tc(g)]) for g in sorted(measured)]
        state = forward_predict(model, measurements)
        evidence = classify(state, measurements)
        conflicts = [e for e in evidence if e.kind == "conflict"]
        if not conflicts:
            continue
        instances += 1
        confirmed = set()
        for b in evidence:
            if b.kind == "confirmation":
                confirmed |= components(b.members)
        reduced = [frozenset(components(k.members) - confirmed) for k in conflicts]
        reduced_f = [frozenset(components(k.focused_members) - confirmed)
                     for k in conflicts]
        for candidate in sorted(set().union(*reduced_f)):
            lacking_f = [s for s in reduced_f if candidate not in s and s]
            lacking_u = [s for s in reduced if candidate not in s and s]
            mhs_size, _ = minimal_hitting_set(lacking_u)
            candidates_checked += 1
            # rule 1's count is an upper bound for the exact hitting set
            assert mhs_size <= len(lacking_f)
            assert mhs_size <= len(lacking_u)
            # focused sets are subsets, so the focused count dominates:
            # every unfocused set lacking c also lacks c when focused
            assert len(lacking_u) <= len(lacking_f)
    assert instances >= 200 and candidates_checked > 0
    report(f"hitting-set bound ({instances} instances, "
           f"{candidates_checked} candidates, zero violations)")


# -- criterion 7: single-fault soundness sweep -----------------------------------


def test_single_fault_sweep():
    rows = []
    rows += sweep("dag", n=30, k=3, runs=250, faults_per_run=1,
                  rule="r1", strategy="halving", seed=10_000)
    rows += sweep("dag", n=50, k=3, runs=250, faults_per_run=1,
                  rule="r1", strategy="entropy", seed=20_000)
    assert len(rows) >= 500
    wrong = [r for r in rows if not r.correct]
    assert not wrong, f"misdiagnosed seeds: {[r.seed for r in wrong[:5]]}"
    assert all(r.outcome == "diagnosed" for r in rows)
    assert all(r.probes <= r.n for r in rows)

    double = sweep("dag", n=30, k=3, runs=60, faults_per_run=2,
                   rule="r1", strategy="halving", seed=30_000)
    misses = sum(1 for r in double if not r.correct)
    report(f"single-fault sweep ({len(rows)} runs, 100% diagnosed; "
           f"double-fault miss rate {misses}/{len(double)} [informational])")


# -- criterion 8: complexity scaling ----------------------------------------------


def _sparse_rule_time(n: int, seed: int) -> float:
    rng = random.Random(seed)
    model = generate_model("dag", n, k=2, seed=seed)
    sources = random_source_observations(model, rng)
    gates = [c.id for c in model.components if not c.is_source]
    faults = [FaultSpec.stuck_at(g, rng.random() < 0.5)
              for g in rng.sample(gates, max(1, n // 50))]
    faulty = inject(model, faults)
    truth = ground_truth(faulty, sources)
    measured = [g for g in gates if rng.random() < 0.3]
    measurements = sources + [Observation(g, 0, truth[tc(g)]) for g in measured]
    state = forward_predict(model, measurements)
    evidence = classify(state, measurements)
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        try:
            focus_rule1(evidence)
        except focusing.InconsistentEvidenceError:
            pass
        best = min(best, time.perf_counter() - t0)
    return best


def _dense_evidence(n: int) -> list[EvidenceSet]:
    half = n // 2
    shared = frozenset(tc(f"s{i}") for i in range(half))
    sets = []
    for j in range(half):
        owner = tc(f"o{j}")
        members = shared | {owner}
        sets.append(EvidenceSet(kind="conflict", origin=owner, members=members,
                                focused_members=members, assumptions=frozenset()))
    return sets


def test_complexity_scaling():
    sizes = [1000, 2000, 4000, 8000]

    sparse_times = [_sparse_rule_time(n, seed=7) for n in sizes]
    assert all(t < 5.0 for t in sparse_times)
    r = statistics.correlation(sizes, sparse_times)
    r_squared = r * r
    assert r_squared >= 0.95, f"linear fit R^2 = {r_squared:.3f}"

    dense_times = []
    for n in sizes:
        evidence = _dense_evidence(n)
        best = float("inf")
        for _ in range(2):
            t0 = time.perf_counter()
            focus_rule1(evidence)
            best = min(best, time.perf_counter() - t0)
        dense_times.append(best)
        assert best < 5.0, f"dense point n={n} took {best:.2f}s"
    import math

    log_x = [math.log(n) for n in sizes]
    log_y = [math.log(t) for t in dense_times]
    slope, _intercept = statistics.linear_regression(log_x, log_y)
    assert slope <= 2.2, f"dense log-log slope {slope:.2f}"
    report(
        "complexity scaling (sparse R^2="
        f"{r_squared:.3f}, dense slope={slope:.2f}, all points < 5s)"
    )


# -- criterion 9: property suites ---------------------------------------------------


def _random_observed(seed: int, n: int = 8):
    rng = random.Random(seed)
    model = generate_model("dag", n, k=2, seed=seed)
    sources = random_source_observations(model, rng)
    gates = [c.id for c in model.components if not c.is_source]
    truth = ground_truth(FaultyModel(model=model), sources)
    extra = [Observation(g, 0, truth[tc(g)]) for g in gates if rng.random() < 0.3]
    return model, sources + extra


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_property_dep_chain(seed):
    model, observations = _random_observed(seed)
    state = forward_predict(model, observations)
    for owner, preds in state.predictions.items():
        for pred in preds:
            assert pred.deps.mask_free <= pred.deps.focused <= pred.deps.dep
            assert owner in pred.deps.mask_free


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_property_focused_is_enumeration_intersection(seed):
    model, observations = _random_observed(seed, n=7)
    state = forward_predict(model, observations)
    for comp in model.components:
        if comp.is_source:
            continue
        sets, truncated = enumerate_dep_sets(model, observations, comp.id, limit=4000)
        if truncated:
            continue
        assert frozenset.intersection(*sets) == \
            state.predictions[tc(comp.id)][0].deps.focused


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_property_prob_monotone(seed):
    rng = random.Random(seed)
    ids = [f"c{i}" for i in range(8)]
    priors = {cid: rng.uniform(0.001, 0.6) for cid in ids}
    cut = rng.randint(0, 8)
    subset = {tc(c) for c in ids[:cut]}
    superset = subset | {tc(c) for c in ids[cut:]}
    assert prob_any_broken(set(), priors) == 0.0
    assert prob_any_broken(subset, priors) <= prob_any_broken(superset, priors)
    assert 0.0 <= prob_any_broken(superset, priors) < 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_property_cancellation_mode_monotonicity(seed):
    rng = random.Random(seed)
    ids = ["a", "b", "c"]

    def rand_set(kind, origin):
        members = frozenset(
            tc(c, rng.randint(0, 3)) for c in ids if rng.random() < 0.6
        ) | {tc(origin, rng.randint(0, 3))}
        return EvidenceSet(kind=kind, origin=sorted(members)[0],
                           members=members, focused_members=members,
                           assumptions=frozenset())

    kf = rand_set("conflict", "c")
    confirmations = [rand_set("confirmation", "b") for _ in range(rng.randint(0, 3))]
    for cid in ids:
        if not any(m.component == cid for m in kf.focused_members):
            continue
        if cancelled(cid, kf, confirmations, "intermittent"):
            assert cancelled(cid, kf, confirmations, "nonintermittent")


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_property_probe_strict_split(seed):
    rng = random.Random(seed)
    model = generate_model("dag", 12, k=2, seed=seed)
    gates = [c.id for c in model.components if not c.is_source]
    sources = random_source_observations(model, rng)
    faulty = inject(model, [FaultSpec.stuck_at(rng.choice(gates), rng.random() < 0.5)])
    truth = ground_truth(faulty, sources)
    measurements = sources + [
        Observation(c, 0, truth[tc(c)]) for c in sink_components(model)]
    view = diagnose_once(model, measurements, "r1", "nonintermittent", "halving")
    if view.advice is None:
        return
    probe = tc(view.advice.probe, view.advice.time)
    pred = view.state.predictions[probe][0]
    live = [f for f in view.focuses if len(f.members) > 1]
    assert any(
        pred.deps.focused & f.members and pred.deps.focused & f.members != f.members
        for f in live
    )


def test_property_loop_fixed_point_stability():
    from test_propagation import LATCH_DOC
    from conftest import model_from

    model = model_from(LATCH_DOC)
    observations = obs(("sbar", 0, True), ("rbar", 0, True))
    result = loop_predict_stateful(
        model, ["qg", "qbarg"], {"qg": True, "qbarg": False}, observations)
    again = loop_predict_stateful(
        model, ["qg", "qbarg"],
        {w: p.value for w, p in result.items()}, observations)
    assert {w: (p.value, p.deps) for w, p in result.items()} == \
        {w: (p.value, p.deps) for w, p in again.items()}


def test_property_transcript_determinism():
    def run(seed):
        rng = random.Random(seed)
        model = generate_model("dag", 15, k=2, seed=seed)
        gates = [c.id for c in model.components if not c.is_source]
        sources = random_source_observations(model, rng)
        faulty = inject(model, [FaultSpec.stuck_at(rng.choice(gates), True)])
        truth = ground_truth(faulty, sources)
        initial = sources + [
            Observation(c, 0, truth[tc(c)]) for c in sink_components(model)]
        transcript = run_session(model, faulty, rule="r1", strategy="halving",
                                 initial_observations=initial)
        return json.dumps(transcript.to_json(), sort_keys=True)

    for seed in range(12):
        assert run(seed) == run(seed)


def test_property_suites_reported():
    report("property suites (dep chain, oracle equivalence, Pr monotone, "
           "cancellation modes, strict split, fixed point, determinism)")
