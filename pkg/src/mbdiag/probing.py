"""Probe-point selection inside a focus.

The entropy criterion picks the unmeasured observable output whose
confirmation probability Pr(F')/Pr(F) is closest to one half, where
F' = F - focused-deps(candidate).  When a candidate's mask-free set differs
from its focused set only the bounds [Pr(F')/Pr(F), Pr(F'')/Pr(F)] are
known; the bounds strategy targets the interval midpoint.  Divide and
conquer halves the focus by cardinality instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .focusing import Focus
from .propagation import Prediction, PredictionState, TimedComponent


class ProbingError(Exception):
    pass


class FocusExhaustedError(ProbingError):
    """No candidate splits the focus (singleton or unsplittable)."""


class MaskedCandidatesError(ProbingError):
    """Every candidate has mask_free != focused: use the bounds strategy."""


@dataclass(frozen=True)
class ProbeAdvice:
    probe: str
    time: int
    strategy: str  # "entropy" | "bounds" | "halving"
    criterion_value: float
    bounds: Optional[tuple[float, float]] = None

    def to_json(self) -> dict:
        out = {
            "probe": self.probe,
            "time": self.time,
            "strategy": self.strategy,
            "criterion_value": round(self.criterion_value, 9),
        }
        if self.bounds is not None:
            out["bounds"] = [round(self.bounds[0], 9), round(self.bounds[1], 9)]
        return out


def prob_any_broken(
    members: Iterable[TimedComponent], priors: Mapping[str, float]
) -> float:
    """Probability that at least one member component is broken; 0 for the
    empty set.  Components appearing at several time points count once."""
    ids = {tc.component for tc in members}
    if not ids:
        return 0.0
    product = 1.0
    for cid in ids:
        product *= 1.0 - priors[cid]
    return 1.0 - product


def _reference_prediction(preds: tuple[Prediction, ...]) -> Prediction:
    # prefer the assumption-free prediction; fall back to the fewest-assumption one
    return min(
        preds,
        key=lambda p: (len(p.deps.assumptions),
                       sorted(a.label() for a in p.deps.assumptions)),
    )


def _candidates(
    focus_members: frozenset[TimedComponent], state: PredictionState
) -> list[tuple[TimedComponent, Prediction]]:
    """Unmeasured observable outputs whose focused deps split the focus."""
    out = []
    for owner in sorted(state.predictions):
        if owner in state.measured:
            continue
        if owner.component not in state.model.observables:
            continue
        preds = state.predictions[owner]
        if not preds:
            continue
        pred = _reference_prediction(preds)
        overlap = pred.deps.focused & focus_members
        if overlap and overlap != focus_members:
            out.append((owner, pred))
    return out


def select_probe_entropy(
    focus: Focus, state: PredictionState, priors: Mapping[str, float]
) -> ProbeAdvice:
    """Candidate whose confirmation probability is closest to 1/2.

    Only valid for candidates with mask_free == focused; if every splitting
    candidate is masked the caller should fall back to probe bounds.
    """
    f_members = focus.members
    pr_f = prob_any_broken(f_members, priors)
    if pr_f == 0.0:
        raise ProbingError("degenerate focus: Pr(F) = 0")
    candidates = _candidates(f_members, state)
    if not candidates:
        raise FocusExhaustedError(f"focus {focus.labels()} cannot be split")
    usable = [
        (owner, pred)
        for owner, pred in candidates
        if pred.deps.mask_free == pred.deps.focused
    ]
    if not usable:
        raise MaskedCandidatesError(
            "every splitting candidate has mask_free != focused"
        )
    best = None
    for owner, pred in usable:
        remainder = f_members - pred.deps.focused
        ratio = prob_any_broken(remainder, priors) / pr_f
        key = (abs(ratio - 0.5), owner.component, owner.time)
        if best is None or key < best[0]:
            best = (key, owner, ratio)
    _, owner, ratio = best
    return ProbeAdvice(
        probe=owner.component, time=owner.time, strategy="entropy",
        criterion_value=ratio,
    )


def probe_bounds(
    candidate: TimedComponent,
    focus: Focus,
    state: PredictionState,
    priors: Mapping[str, float],
) -> tuple[float, float]:
    """[Pr(F - focused)/Pr(F), Pr(F - mask_free)/Pr(F)] for one candidate."""
    pr_f = prob_any_broken(focus.members, priors)
    if pr_f == 0.0:
        raise ProbingError("degenerate focus: Pr(F) = 0")
    pred = _reference_prediction(state.predictions[candidate])
    lower = prob_any_broken(focus.members - pred.deps.focused, priors) / pr_f
    upper = prob_any_broken(focus.members - pred.deps.mask_free, priors) / pr_f
    return (lower, upper)


def select_probe_bounds(
    focus: Focus, state: PredictionState, priors: Mapping[str, float]
) -> ProbeAdvice:
    """Bounds-interval selection: midpoint closest to 1/2."""
    candidates = _candidates(focus.members, state)
    if not candidates:
        raise FocusExhaustedError(f"focus {focus.labels()} cannot be split")
    best = None
    for owner, _pred in candidates:
        lo, hi = probe_bounds(owner, focus, state, priors)
        mid = (lo + hi) / 2.0
        key = (abs(mid - 0.5), owner.component, owner.time)
        if best is None or key < best[0]:
            best = (key, owner, mid, (lo, hi))
    _, owner, mid, bounds = best
    return ProbeAdvice(
        probe=owner.component, time=owner.time, strategy="bounds",
        criterion_value=mid, bounds=bounds,
    )


def select_probe_halving(focus: Focus, state: PredictionState) -> ProbeAdvice:
    """Divide and conquer: |F - focused-deps(candidate)| closest to |F|/2."""
    f_members = focus.members
    if len(f_members) < 2:
        raise FocusExhaustedError("halving needs a focus of at least two members")
    candidates = _candidates(f_members, state)
    if not candidates:
        raise FocusExhaustedError(f"focus {focus.labels()} cannot be split")
    half = len(f_members) / 2.0
    best = None
    for owner, pred in candidates:
        left = len(f_members - pred.deps.focused)
        key = (abs(left - half), owner.component, owner.time)
        if best is None or key < best[0]:
            best = (key, owner, left)
    _, owner, left = best
    return ProbeAdvice(
        probe=owner.component, time=owner.time, strategy="halving",
        criterion_value=left / len(f_members),
    )
