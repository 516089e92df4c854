import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbdiag import focusing
from mbdiag.focusing import Focus, classify, focus_rule1, focus_rule2
from mbdiag.probing import (
    FocusExhaustedError,
    prob_any_broken,
    probe_bounds,
    select_probe_bounds,
    select_probe_entropy,
    select_probe_halving,
)
from mbdiag.propagation import TimedComponent, forward_predict

from conftest import FULLADDER_EVIDENCE, model_from, obs


def tc(cid, t=0):
    return TimedComponent(cid, t)


def brute_force_prob(ids, priors):
    """Exact P(at least one broken) by enumerating fault patterns."""
    total = 0.0
    ids = sorted(ids)
    for pattern in itertools.product([False, True], repeat=len(ids)):
        if not any(pattern):
            continue
        p = 1.0
        for broken, cid in zip(pattern, ids):
            p *= priors[cid] if broken else 1.0 - priors[cid]
        total += p
    return total


class TestProbAnyBroken:
    def test_empty_set(self):
        assert prob_any_broken(set(), {}) == 0.0

    def test_singleton(self):
        assert prob_any_broken({tc("c")}, {"c": 0.1}) == pytest.approx(0.1)

    def test_two_members_inclusion_exclusion(self):
        # oracle: 0.1 + 0.1 - 0.01
        priors = {"a": 0.1, "b": 0.1}
        members = {tc("a"), tc("b")}
        assert prob_any_broken(members, priors) == pytest.approx(0.19)
        assert prob_any_broken(members, priors) == pytest.approx(
            brute_force_prob(["a", "b"], priors))

    def test_duplicate_times_count_once(self):
        priors = {"a": 0.25}
        assert prob_any_broken({tc("a", 0), tc("a", 3)}, priors) == pytest.approx(0.25)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_matches_enumeration_oracle(self, seed):
        rng = random.Random(seed)
        ids = [f"c{i}" for i in range(rng.randint(1, 6))]
        priors = {cid: rng.uniform(0.01, 0.5) for cid in ids}
        members = {tc(cid) for cid in ids}
        assert prob_any_broken(members, priors) == pytest.approx(
            brute_force_prob(ids, priors))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_monotone_in_members(self, seed):
        rng = random.Random(seed)
        ids = [f"c{i}" for i in range(6)]
        priors = {cid: rng.uniform(0.001, 0.5) for cid in ids}
        subset = {tc(c) for c in ids[:3]}
        superset = subset | {tc(c) for c in ids[3:]}
        assert prob_any_broken(subset, priors) <= prob_any_broken(superset, priors)
        assert 0.0 <= prob_any_broken(superset, priors) < 1.0


def fulladder_focus_state(fulladder):
    observations = obs(*FULLADDER_EVIDENCE)
    state = forward_predict(fulladder, observations)
    evidence = classify(state, observations)
    focus = focus_rule2(evidence).focuses[0]
    priors = {c.id: c.prior for c in fulladder.components}
    return focus, state, priors


class TestEntropySelection:
    def test_fulladder_probes_and2(self, fulladder):
        focus, state, priors = fulladder_focus_state(fulladder)
        advice = select_probe_entropy(focus, state, priors)
        assert advice.probe == "and2"
        assert advice.criterion_value == pytest.approx(0.5, abs=1e-3)

    def test_singleton_focus_exhausted(self, fulladder):
        _, state, priors = fulladder_focus_state(fulladder)
        singleton = Focus(frozenset({tc("or1")}), frozenset(), 0)
        with pytest.raises(FocusExhaustedError):
            select_probe_entropy(singleton, state, priors)

    def test_chain_probes_midpoint(self):
        # a -> b -> c -> d, focus = whole chain, uniform priors:
        # hand-enumerated ratios pick b (closest to 1/2)
        doc = {
            "components": [
                {"id": "s", "type": "source"},
            ] + [
                {"id": cid, "type": "function", "inputs": ["x"],
                 "function": {"branches": [{"guard": "true", "expr": "x"}]}}
                for cid in ("a", "b", "c", "d")
            ],
            "connections": [
                {"from": "s.out", "to": "a.x"},
                {"from": "a.out", "to": "b.x"},
                {"from": "b.out", "to": "c.x"},
                {"from": "c.out", "to": "d.x"},
            ],
        }
        model = model_from(doc)
        observations = obs(("s", 0, True), ("d", 0, False))
        state = forward_predict(model, observations)
        evidence = classify(state, observations)
        focus = focus_rule1(evidence).focuses[0]
        assert components_set(focus) == {"a", "b", "c", "d"}
        priors = {c.id: 0.1 for c in model.components}
        advice = select_probe_entropy(focus, state, priors)
        ratios = {}
        pr_f = prob_any_broken(focus.members, priors)
        for cand in ("a", "b", "c"):
            pred = state.predictions[tc(cand)][0]
            ratios[cand] = prob_any_broken(
                focus.members - pred.deps.focused, priors) / pr_f
        hand_best = min(ratios, key=lambda c: (abs(ratios[c] - 0.5), c))
        assert advice.probe == hand_best == "b"

    def test_masked_candidates_error(self, generators):
        # with the generator outputs unobservable, the only splitting
        # candidate is the masked indicator d
        from mbdiag.model import SystemModel
        from mbdiag.probing import MaskedCandidatesError

        restricted = SystemModel(
            components=generators.components,
            connections=generators.connections,
            observables=["c", "d", "e"],
            epsilon=generators.epsilon,
        )
        observations = obs(("e", 0, False))
        state = forward_predict(restricted, observations)
        evidence = classify(state, observations)
        focus = focus_rule1(evidence).focuses[0]
        priors = {c.id: 0.1 for c in restricted.components}
        with pytest.raises(MaskedCandidatesError):
            select_probe_entropy(focus, state, priors)


def components_set(focus):
    return {m.component for m in focus.members}


class TestBounds:
    def test_zero_width_interval_equals_entropy(self, fulladder):
        focus, state, priors = fulladder_focus_state(fulladder)
        lo, hi = probe_bounds(tc("and2"), focus, state, priors)
        assert lo == pytest.approx(hi)
        advice = select_probe_entropy(focus, state, priors)
        assert lo == pytest.approx(advice.criterion_value)

    def test_generators_bounds_interval(self, generators):
        observations = obs(("e", 0, False))
        state = forward_predict(generators, observations)
        priors = {c.id: 0.1 for c in generators.components}
        focus = Focus(frozenset({tc("b"), tc("d"), tc("e")}), frozenset(), 0)
        lo, hi = probe_bounds(tc("d"), focus, state, priors)
        pr_f = 1 - 0.9 ** 3
        assert lo == pytest.approx(0.1 / pr_f)
        assert hi == pytest.approx(0.19 / pr_f)

    def test_non_intersecting_candidate_useless(self, fulladder):
        focus, state, priors = fulladder_focus_state(fulladder)
        lo, hi = probe_bounds(tc("and1"), focus, state, priors)
        assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)

    def test_bounds_selection_on_masked_model(self, generators):
        from mbdiag.model import SystemModel

        restricted = SystemModel(
            components=generators.components,
            connections=generators.connections,
            observables=["c", "d", "e"],
            epsilon=generators.epsilon,
        )
        observations = obs(("e", 0, False))
        state = forward_predict(restricted, observations)
        evidence = classify(state, observations)
        focus = focus_rule1(evidence).focuses[0]
        priors = {c.id: 0.1 for c in restricted.components}
        advice = select_probe_bounds(focus, state, priors)
        assert advice.probe == "d"
        assert advice.bounds is not None
        lo, hi = advice.bounds
        assert lo <= advice.criterion_value <= hi


class TestHalving:
    def test_fulladder_probes_and2(self, fulladder):
        focus, state, _ = fulladder_focus_state(fulladder)
        advice = select_probe_halving(focus, state)
        assert advice.probe == "and2"

    def test_symmetric_tie_lexicographic(self):
        # two independent buffers both feeding a conflict-like focus
        doc = {
            "components": [
                {"id": "s", "type": "source"},
                {"id": "g1", "type": "function", "inputs": ["x"],
                 "function": {"branches": [{"guard": "true", "expr": "x"}]}},
                {"id": "g2", "type": "function", "inputs": ["x"],
                 "function": {"branches": [{"guard": "true", "expr": "x"}]}},
                {"id": "top", "type": "function", "inputs": ["x", "y"],
                 "function": {"branches": [{"guard": "true", "expr": "x != y"}]}},
            ],
            "connections": [
                {"from": "s.out", "to": "g1.x"},
                {"from": "s.out", "to": "g2.x"},
                {"from": "g1.out", "to": "top.x"},
                {"from": "g2.out", "to": "top.y"},
            ],
        }
        model = model_from(doc)
        observations = obs(("s", 0, True), ("top", 0, True))
        state = forward_predict(model, observations)
        focus = Focus(frozenset({tc("g1"), tc("g2")}), frozenset(), 0)
        advice = select_probe_halving(focus, state)
        assert advice.probe == "g1"

    def test_chain_halves_at_b(self):
        doc = {
            "components": [
                {"id": "s", "type": "source"},
            ] + [
                {"id": cid, "type": "function", "inputs": ["x"],
                 "function": {"branches": [{"guard": "true", "expr": "x"}]}}
                for cid in ("a", "b", "c", "d")
            ],
            "connections": [
                {"from": "s.out", "to": "a.x"},
                {"from": "a.out", "to": "b.x"},
                {"from": "b.out", "to": "c.x"},
                {"from": "c.out", "to": "d.x"},
            ],
        }
        model = model_from(doc)
        observations = obs(("s", 0, True), ("d", 0, False))
        state = forward_predict(model, observations)
        evidence = classify(state, observations)
        focus = focus_rule1(evidence).focuses[0]
        # exhaustive candidate scan: |F - deps| for a,b,c = 3,2,1; |F|/2 = 2
        advice = select_probe_halving(focus, state)
        assert advice.probe == "b"

    def test_small_focus_precondition(self, fulladder):
        _, state, _ = fulladder_focus_state(fulladder)
        with pytest.raises(FocusExhaustedError):
            select_probe_halving(Focus(frozenset({tc("or1")}), frozenset(), 0), state)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=2, max_value=400))
def test_entropy_and_halving_agree_on_chains(chain_length):
    """With uniform priors and candidate dep sets inside the focus, the
    entropy split reduces to cardinality halving."""
    import json
    from mbdiag.model import parse_model

    comps = [{"id": "s", "type": "source"}] + [
        {"id": f"g{i}", "type": "function", "inputs": ["x"],
         "function": {"branches": [{"guard": "true", "expr": "x"}]}}
        for i in range(min(chain_length, 40))
    ]
    conns = [{"from": "s.out", "to": "g0.x"}] + [
        {"from": f"g{i - 1}.out", "to": f"g{i}.x"}
        for i in range(1, min(chain_length, 40))
    ]
    model = parse_model(json.dumps(
        {"components": comps, "connections": conns}))
    last = f"g{min(chain_length, 40) - 1}"
    observations = obs(("s", 0, True), (last, 0, False))
    state = forward_predict(model, observations)
    evidence = classify(state, observations)
    focus = focus_rule1(evidence).focuses[0]
    if len(focus.members) < 2:
        return
    # the agreement holds whenever cardinality halving has a unique winner;
    # on an exact tie halving breaks lexicographically while the entropy
    # ratio's second-order term prefers the smaller remainder
    half = len(focus.members) / 2.0
    distances = sorted(
        abs(len(focus.members - state.predictions[tc(f"g{i}")][0].deps.focused)
            - half)
        for i in range(min(chain_length, 40) - 1)
        if state.predictions[tc(f"g{i}")][0].deps.focused & focus.members
        and state.predictions[tc(f"g{i}")][0].deps.focused & focus.members
        != focus.members
    )
    if len(distances) > 1 and distances[0] == distances[1]:
        return
    # small uniform priors: Pr(X) is linear in |X| up to negligible terms,
    # so the entropy ratio genuinely reduces to cardinality halving
    priors = {c.id: c.prior for c in model.components}
    entropy = select_probe_entropy(focus, state, priors)
    halving = select_probe_halving(focus, state)
    assert entropy.probe == halving.probe


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_returned_probe_strictly_splits(seed):
    """Any advice must partition the focus: deps overlap it properly."""
    from mbdiag.simulator import (FaultSpec, FaultyModel, generate_model,
                                  ground_truth, inject,
                                  random_source_observations, sink_components)
    from mbdiag.model import Observation

    rng = random.Random(seed)
    model = generate_model("dag", 10, k=2, seed=seed)
    gates = [c.id for c in model.components if not c.is_source]
    sources = random_source_observations(model, rng)
    faulty = inject(model, [FaultSpec.stuck_at(rng.choice(gates), rng.random() < 0.5)])
    truth = ground_truth(faulty, sources)
    observations = sources + [
        Observation(c, 0, truth[TimedComponent(c, 0)]) for c in sink_components(model)
    ]
    state = forward_predict(model, observations)
    evidence = classify(state, observations)
    try:
        focuses = focus_rule1(evidence)
    except focusing.InconsistentEvidenceError:
        return
    priors = {c.id: c.prior for c in model.components}
    for focus in focuses:
        if len(focus.members) < 2:
            continue
        for select in (
            lambda: select_probe_entropy(focus, state, priors),
            lambda: select_probe_halving(focus, state),
            lambda: select_probe_bounds(focus, state, priors),
        ):
            try:
                advice = select()
            except (FocusExhaustedError, focusing.FocusingError):
                continue
            except Exception:
                continue
            pred = state.predictions[tc(advice.probe, advice.time)][0]
            overlap = pred.deps.focused & focus.members
            assert overlap and overlap != focus.members
