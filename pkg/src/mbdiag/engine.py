"""One diagnosis step: predict, classify, focus, advise.

Shared by the batch CLI, the closed-loop simulator and the session service
so that replaying a session's observations through the batch path yields
identical focuses and advice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from . import focusing, probing
from .focusing import EvidenceSet, Focus, FocusSet, InconsistentEvidenceError
from .model import Observation, SystemModel
from .probing import ProbeAdvice
from .propagation import (
    Assumption,
    MissingSourceError,
    PredictionState,
    TimedComponent,
    assumption_sort_key,
    forward_predict,
)

STATUS_ACTIVE = "active"
STATUS_DIAGNOSED = "diagnosed"
STATUS_EXHAUSTED = "exhausted"
STATUS_INCONSISTENT = "inconsistent"


@dataclass
class DiagnosisView:
    state: Optional[PredictionState]
    evidence: tuple[EvidenceSet, ...]
    focuses: FocusSet
    rule_used: str
    advice: Optional[ProbeAdvice]
    status: str
    diagnosed: tuple[str, ...] = ()


def _priors(model: SystemModel) -> dict[str, float]:
    return {c.id: c.prior for c in model.components}


def _advise(
    focuses: FocusSet, state: PredictionState, strategy: str
) -> Optional[ProbeAdvice]:
    """Pick the next probe across focuses.

    Assumption-valued focuses come first: measuring the assumed wire settles
    the whole family question (a binary split, criterion 1/2).  Component
    focuses are visited by descending fault probability.
    """
    priors = _priors(state.model)
    measured = state.measured
    for focus in sorted(
        (f for f in focuses if f.assumption_members),
        key=lambda f: f.labels(),
    ):
        for a in sorted(focus.assumption_members, key=assumption_sort_key):
            wire = TimedComponent(a.wire, a.time)
            if wire not in measured and a.wire in state.model.observables:
                return ProbeAdvice(
                    probe=a.wire, time=a.time, strategy="assumption",
                    criterion_value=0.5,
                )
    component_focuses = [
        f for f in focuses if not f.assumption_members and len(f.members) > 1
    ]
    component_focuses.sort(
        key=lambda f: (-probing.prob_any_broken(f.members, priors), f.labels())
    )
    for focus in component_focuses:
        try:
            if strategy == "halving":
                return probing.select_probe_halving(focus, state)
            if strategy == "bounds":
                return probing.select_probe_bounds(focus, state, priors)
            try:
                return probing.select_probe_entropy(focus, state, priors)
            except probing.MaskedCandidatesError:
                return probing.select_probe_bounds(focus, state, priors)
        except probing.FocusExhaustedError:
            continue
    return None


def diagnose_once(
    model: SystemModel,
    observations: Iterable[Observation],
    rule: str = "r1",
    mode: focusing.Mode = "nonintermittent",
    strategy: str = "entropy",
) -> DiagnosisView:
    """Run the full predict/classify/focus/advise pipeline once."""
    obs = list(observations)
    try:
        state = forward_predict(model, obs)
    except MissingSourceError:
        # an interactive session may not have entered all inputs yet
        return DiagnosisView(
            state=None, evidence=(), focuses=FocusSet(()), rule_used=rule,
            advice=None, status=STATUS_ACTIVE,
        )
    evidence = focusing.classify(state, obs)
    rule_used = rule
    try:
        focuses = focusing.apply_rule(rule, evidence, mode)
    except InconsistentEvidenceError:
        # compensated faults: climb from the membership rules to the
        # difference rules, as the evidence demands
        fallback = {"r1": "r2", "r3": "r4"}.get(rule.lower())
        if fallback is None:
            return DiagnosisView(
                state=state, evidence=evidence, focuses=FocusSet(()),
                rule_used=rule, advice=None, status=STATUS_INCONSISTENT,
            )
        try:
            focuses = focusing.apply_rule(fallback, evidence, mode)
            rule_used = fallback
        except InconsistentEvidenceError:
            return DiagnosisView(
                state=state, evidence=evidence, focuses=FocusSet(()),
                rule_used=fallback, advice=None, status=STATUS_INCONSISTENT,
            )

    if not focuses.focuses:
        return DiagnosisView(
            state=state, evidence=evidence, focuses=focuses, rule_used=rule_used,
            advice=None, status=STATUS_DIAGNOSED, diagnosed=(),
        )
    if all(f.is_singleton_component() for f in focuses):
        diagnosed = tuple(
            sorted({tc.component for f in focuses for tc in f.members})
        )
        return DiagnosisView(
            state=state, evidence=evidence, focuses=focuses, rule_used=rule_used,
            advice=None, status=STATUS_DIAGNOSED, diagnosed=diagnosed,
        )
    advice = _advise(focuses, state, strategy)
    status = STATUS_ACTIVE if advice is not None else STATUS_EXHAUSTED
    return DiagnosisView(
        state=state, evidence=evidence, focuses=focuses, rule_used=rule_used,
        advice=advice, status=status,
    )


# -- JSON rendering (shared by CLI and service; sorted for byte stability) --


def value_json(value) -> object:
    return value


def member_json(tc: TimedComponent) -> str:
    return tc.label()


def assumption_json(a: Assumption) -> dict:
    return {"wire": a.wire, "time": a.time, "value": a.value}


def evidence_json(e: EvidenceSet) -> dict:
    return {
        "kind": e.kind,
        "origin": e.origin.label(),
        "members": sorted(member_json(tc) for tc in e.members),
        "focused_members": sorted(member_json(tc) for tc in e.focused_members),
        "assumptions": [
            assumption_json(a)
            for a in sorted(e.assumptions, key=assumption_sort_key)
        ],
    }


def focus_json(f: Focus) -> dict:
    out = {
        "members": f.labels(),
        "score": f.score,
    }
    if f.under_assumed_broken is not None:
        out["under_assumed_broken"] = f.under_assumed_broken
    return out


def focuses_json(fs: FocusSet, rule: str, mode: Optional[str] = None) -> dict:
    out = {
        "focuses": [focus_json(f) for f in fs],
        "rule": rule.upper(),
    }
    if mode is not None:
        out["mode"] = mode
    return out


def prediction_dump(state: PredictionState) -> list[dict]:
    rows = []
    for pred in state.all_predictions():
        rows.append(
            {
                "component": pred.owner.component,
                "time": pred.owner.time,
                "value": value_json(pred.value),
                "dep": sorted(member_json(tc) for tc in pred.deps.dep),
                "focused": sorted(member_json(tc) for tc in pred.deps.focused),
                "mask_free": sorted(member_json(tc) for tc in pred.deps.mask_free),
                "assumptions": [
                    assumption_json(a)
                    for a in sorted(pred.deps.assumptions, key=assumption_sort_key)
                ],
            }
        )
    return rows


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False)
