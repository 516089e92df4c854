"""Conflict/confirmation classification and the four focusing rules.

A measurement that contradicts its prediction turns the prediction's
dependency set into a conflict set (focused variant included); a matching
measurement turns the mask-free set into a confirmation set.  The rules
pick, per focused conflict set, the members most likely to be broken:

* rule 1 - most shared among other conflicts, never confirmed,
* rule 2 - maximal conflict-membership minus confirmation-membership
           (tolerates compensated faults),
* rules 3/4 - the temporal variants, replacing "confirmed" with
           "cancelled" under a chosen intermittency assumption.

Assumed loop wires take part as first-class members: rule 1 treats a
confirmed assumption as exonerated, while rules 2/4 score an assumption by
its conflict memberships alone -- a confirmation that merely *depends* on an
assumption says nothing about the assumption being right, and complementary
assumption families would otherwise neutralise each other.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Sequence, Union

import numpy as np

from .model import Observation
from .propagation import (
    Assumption,
    PredictionState,
    TimedComponent,
    assumption_sort_key,
)

Mode = Literal["nonintermittent", "intermittent"]
Member = Union[TimedComponent, Assumption]


class FocusingError(Exception):
    pass


class InconsistentEvidenceError(FocusingError):
    """Every member of some focused conflict set is exonerated: the evidence
    needs compensation-aware scoring (rules 2/4)."""

    def __init__(self, origin: TimedComponent):
        self.origin = origin
        super().__init__(
            f"every member of the focused conflict set of {origin.label()} "
            "is confirmed or cancelled"
        )


@dataclass(frozen=True)
class EvidenceSet:
    kind: Literal["conflict", "confirmation"]
    origin: TimedComponent
    members: frozenset[TimedComponent]
    focused_members: frozenset[TimedComponent]
    assumptions: frozenset[Assumption]

    def __post_init__(self):
        if not self.focused_members <= self.members:
            raise FocusingError("focused members must be a subset of members")
        if self.kind == "confirmation" and self.members != self.focused_members:
            raise FocusingError("a confirmation set has a single member set")

    def focused_universe(self) -> frozenset[Member]:
        return self.focused_members | self.assumptions  # type: ignore[operator]

    def universe(self) -> frozenset[Member]:
        return self.members | self.assumptions  # type: ignore[operator]


@dataclass(frozen=True)
class Focus:
    members: frozenset[TimedComponent]
    assumption_members: frozenset[Assumption]
    score: int
    under_assumed_broken: Optional[str] = None

    def all_members(self) -> frozenset[Member]:
        return self.members | self.assumption_members  # type: ignore[operator]

    def labels(self) -> list[str]:
        return sorted(tc.label() for tc in self.members) + sorted(
            a.label() for a in self.assumption_members
        )

    def is_singleton_component(self) -> bool:
        return len(self.members) == 1 and not self.assumption_members


@dataclass(frozen=True)
class FocusSet:
    focuses: tuple[Focus, ...]

    def __iter__(self):
        return iter(self.focuses)

    def __len__(self):
        return len(self.focuses)


def member_label(m: Member) -> str:
    return m.label()


def _evidence_order(e: EvidenceSet) -> tuple:
    return (e.origin.time, e.origin.component, e.kind,
            tuple(sorted(a.label() for a in e.assumptions)))


def classify(
    state: PredictionState, measurements: Iterable[Observation]
) -> tuple[EvidenceSet, ...]:
    """Pair measurements with predictions into conflict/confirmation sets.

    Every prediction of the measured owner is classified separately, so an
    owner predicted under several assumption families yields one evidence
    set per family.  An assumed wire whose looped-back re-prediction
    contradicts its assumed value counts as an internal conflict.
    """
    model = state.model
    evidence: list[EvidenceSet] = []
    for obs in measurements:
        comp = model.by_id.get(obs.component)
        if comp is None:
            raise FocusingError(f"measurement of unknown component {obs.component!r}")
        if comp.is_source:
            continue
        if obs.component not in model.observables:
            raise FocusingError(f"{obs.component!r} is not observable")
        owner = TimedComponent(obs.component, obs.time)
        preds = state.predictions.get(owner, ())
        for pred in preds:
            if comp.domain.equal(pred.value, obs.value):
                evidence.append(
                    EvidenceSet(
                        kind="confirmation",
                        origin=owner,
                        members=pred.deps.mask_free,
                        focused_members=pred.deps.mask_free,
                        assumptions=pred.deps.assumptions,
                    )
                )
            else:
                evidence.append(
                    EvidenceSet(
                        kind="conflict",
                        origin=owner,
                        members=pred.deps.dep,
                        focused_members=pred.deps.focused,
                        assumptions=pred.deps.assumptions,
                    )
                )
    for check in state.checks:
        if check.consistent:
            continue
        origin = TimedComponent(check.assumption.wire, check.assumption.time)
        evidence.append(
            EvidenceSet(
                kind="conflict",
                origin=origin,
                members=check.deps.dep,
                focused_members=check.deps.focused,
                assumptions=check.deps.assumptions,
            )
        )
    return tuple(sorted(evidence, key=_evidence_order))


def _split(evidence: Iterable[EvidenceSet]):
    ordered = sorted(evidence, key=_evidence_order)
    conflicts = [e for e in ordered if e.kind == "conflict"]
    confirmations = [e for e in ordered if e.kind == "confirmation"]
    return conflicts, confirmations


def _make_focus(
    winners: Iterable[Member], score: int, under: Optional[str] = None
) -> Focus:
    comps = frozenset(m for m in winners if isinstance(m, TimedComponent))
    asms = frozenset(m for m in winners if isinstance(m, Assumption))
    return Focus(members=comps, assumption_members=asms, score=score,
                 under_assumed_broken=under)


def minimize(focuses: Iterable[Focus]) -> FocusSet:
    """Inclusion-minimal antichain with a stable lexicographic order."""
    unique: dict[frozenset, Focus] = {}
    for f in focuses:
        key = f.all_members()
        prev = unique.get(key)
        if prev is None or f.score > prev.score:
            unique[key] = f
    kept: list[Focus] = []
    for f in sorted(unique.values(), key=lambda f: (len(f.all_members()), f.labels())):
        if not any(k.all_members() <= f.all_members() for k in kept):
            kept.append(f)
    kept.sort(key=lambda f: f.labels())
    return FocusSet(focuses=tuple(kept))


class _MemberIndex:
    """Interns evidence members as integers so the per-seed scoring runs as
    vectorised array arithmetic; rule time stays linear in evidence size."""

    def __init__(self, conflicts: Sequence[EvidenceSet],
                 confirmations: Sequence[EvidenceSet]):
        self.members: list[Member] = []
        self._ids: dict[Member, int] = {}
        self.seed_arrays: list[np.ndarray] = []
        for k in conflicts:
            ids = [self._intern(m) for m in k.focused_members]
            ids += [self._intern(a) for a in k.assumptions]
            self.seed_arrays.append(np.asarray(sorted(ids), dtype=np.int64))
        conf_ids: list[int] = []
        for b in confirmations:
            conf_ids += [self._intern(m) for m in b.members]
            conf_ids += [self._intern(a) for a in b.assumptions]
        size = len(self.members)
        concat = (np.concatenate(self.seed_arrays)
                  if self.seed_arrays else np.empty(0, dtype=np.int64))
        self.k_counts = np.bincount(concat, minlength=size)
        self.b_counts = np.bincount(
            np.asarray(conf_ids, dtype=np.int64), minlength=size
        ) if conf_ids else np.zeros(size, dtype=np.int64)
        self.is_assumption = np.asarray(
            [isinstance(m, Assumption) for m in self.members], dtype=bool
        ) if size else np.empty(0, dtype=bool)

    def _intern(self, member: Member) -> int:
        found = self._ids.get(member)
        if found is None:
            found = len(self.members)
            self._ids[member] = found
            self.members.append(member)
        return found

    def resolve(self, ids: np.ndarray) -> list[Member]:
        return [self.members[i] for i in ids]


def _collect_focuses(idx: _MemberIndex, conflicts, per_seed) -> FocusSet:
    """Run `per_seed` over each indexed seed, deduplicating winner sets
    before materialising Focus objects."""
    focuses = []
    seen: dict[bytes, int] = {}
    for seed, arr in zip(conflicts, idx.seed_arrays):
        winner_ids, score = per_seed(seed, arr)
        key = winner_ids.tobytes()
        prev = seen.get(key)
        if prev is not None:
            if score > focuses[prev].score:
                focuses[prev] = _make_focus(
                    focuses[prev].all_members(), int(score))
            continue
        seen[key] = len(focuses)
        focuses.append(_make_focus(idx.resolve(winner_ids), int(score)))
    return minimize(focuses)


def focus_rule1(evidence: Iterable[EvidenceSet]) -> FocusSet:
    """Per focused conflict set: unconfirmed members shared by the most
    other focused conflict sets."""
    conflicts, confirmations = _split(evidence)
    if not conflicts:
        return FocusSet(focuses=())
    idx = _MemberIndex(conflicts, confirmations)
    confirmed = np.zeros(len(idx.members), dtype=bool)
    for b in confirmations:
        for m in b.universe():
            confirmed[idx._ids[m]] = True

    def per_seed(seed, arr):
        candidates = arr[~confirmed[arr]]
        if candidates.size == 0:
            raise InconsistentEvidenceError(seed.origin)
        scores = idx.k_counts[candidates] - 1
        best = scores.max()
        return candidates[scores == best], best

    return _collect_focuses(idx, conflicts, per_seed)


def focus_rule2(evidence: Iterable[EvidenceSet]) -> FocusSet:
    """Per focused conflict set: members maximising conflict memberships
    minus confirmation memberships (assumptions: conflict memberships only).

    A confirmation that merely depends on an assumed wire does not vouch for
    the assumption, so assumptions keep their full conflict score."""
    conflicts, confirmations = _split(evidence)
    if not conflicts:
        return FocusSet(focuses=())
    idx = _MemberIndex(conflicts, confirmations)
    scores_all = idx.k_counts - np.where(idx.is_assumption, 0, idx.b_counts)

    def per_seed(seed, arr):
        scores = scores_all[arr]
        best = scores.max()
        return arr[scores == best], best

    return _collect_focuses(idx, conflicts, per_seed)


def _entries(kf: EvidenceSet, component: str) -> list[TimedComponent]:
    return [tc for tc in kf.focused_members if tc.component == component]


def _b_covers(b: EvidenceSet, entry: TimedComponent, mode: Mode) -> bool:
    if mode == "intermittent":
        return entry in b.members
    return any(
        tc.component == entry.component and tc.time >= entry.time
        for tc in b.members
    )


def _b_covers_assumption(b: EvidenceSet, a: Assumption, mode: Mode) -> bool:
    if mode == "intermittent":
        return a in b.assumptions
    return any(
        x.wire == a.wire and x.value == a.value and x.time >= a.time
        for x in b.assumptions
    )


def cancelled(
    component: str,
    kf: EvidenceSet,
    confirmations: Sequence[EvidenceSet],
    mode: Mode,
) -> bool:
    """Whether confirmations exempt `component` from the conflict set `kf`.

    Non-intermittent faults persist, so a later (or equal) confirmed time
    exonerates an earlier entry; intermittent faults require confirmation at
    exactly the entry's time.
    """
    if kf.kind != "conflict":
        raise FocusingError("cancellation is defined against a conflict set")
    entries = _entries(kf, component)
    if not entries:
        return False
    return all(
        any(_b_covers(b, entry, mode) for b in confirmations) for entry in entries
    )


def _assumption_cancelled(
    a: Assumption, confirmations: Sequence[EvidenceSet], mode: Mode
) -> bool:
    return any(_b_covers_assumption(b, a, mode) for b in confirmations)


def _b_cancels_whole(
    b: EvidenceSet, kf: EvidenceSet, component: str, mode: Mode
) -> bool:
    entries = _entries(kf, component)
    return bool(entries) and all(_b_covers(b, e, mode) for e in entries)


def focus_rule3(evidence: Iterable[EvidenceSet], mode: Mode) -> FocusSet:
    """Rule 1 with "confirmed" replaced by per-mode cancellation; members are
    counted by component identity across time points."""
    conflicts, confirmations = _split(evidence)
    if not conflicts:
        return FocusSet(focuses=())
    id_sets = [
        {tc.component for tc in k.focused_members} | set(k.assumptions)
        for k in conflicts
    ]
    focuses = []
    for i, seed in enumerate(conflicts):
        ids = sorted({tc.component for tc in seed.focused_members})
        cands: list[Member] = [
            cid for cid in ids if not cancelled(cid, seed, confirmations, mode)
        ]
        cands += [
            a
            for a in sorted(seed.assumptions, key=assumption_sort_key)
            if not _assumption_cancelled(a, confirmations, mode)
        ]
        if not cands:
            raise InconsistentEvidenceError(seed.origin)

        def count(m) -> int:
            return sum(1 for j, s in enumerate(id_sets) if j != i and m in s)

        best = max(count(m) for m in cands)
        winners = []
        for m in cands:
            if count(m) != best:
                continue
            if isinstance(m, Assumption):
                winners.append(m)
            else:
                winners.extend(_entries(seed, m))
        focuses.append(_make_focus(winners, best))
    return minimize(focuses)


def focus_rule4(evidence: Iterable[EvidenceSet], mode: Mode) -> FocusSet:
    """Rule 2 with the subtrahend counting confirmation sets that cancel the
    member for the seeding conflict set."""
    conflicts, confirmations = _split(evidence)
    if not conflicts:
        return FocusSet(focuses=())
    id_sets = [
        {tc.component for tc in k.focused_members} | set(k.assumptions)
        for k in conflicts
    ]
    focuses = []
    for seed in conflicts:
        ids = sorted({tc.component for tc in seed.focused_members})
        members: list[Member] = list(ids) + sorted(
            seed.assumptions, key=assumption_sort_key
        )

        def score(m) -> int:
            k_count = sum(1 for s in id_sets if m in s)
            if isinstance(m, Assumption):
                return k_count
            b_count = sum(
                1 for b in confirmations if _b_cancels_whole(b, seed, m, mode)
            )
            return k_count - b_count

        best = max(score(m) for m in members)
        winners = []
        for m in members:
            if score(m) != best:
                continue
            if isinstance(m, Assumption):
                winners.append(m)
            else:
                winners.extend(_entries(seed, m))
        focuses.append(_make_focus(winners, best))
    return minimize(focuses)


def supplementary_focus(
    e: Union[str, TimedComponent, Assumption],
    evidence: Iterable[EvidenceSet],
) -> FocusSet:
    """Additional focuses under the hypothesis that `e` is itself broken.

    Confirmation sets containing e turn into conflict sets with the members
    of e's own conflict sets removed; rule-2 scoring then runs over the
    transformed conflicts alone.
    """
    conflicts, confirmations = _split(evidence)

    def contains(s: EvidenceSet) -> bool:
        if isinstance(e, Assumption):
            return e in s.assumptions
        if isinstance(e, TimedComponent):
            return e in s.universe()
        return any(tc.component == e for tc in s.members)

    in_evidence = any(contains(s) for s in conflicts) or any(
        contains(b) for b in confirmations
    )
    in_confirmation = any(contains(b) for b in confirmations)
    if not in_evidence or not in_confirmation:
        raise FocusingError(
            f"{e!r} must appear in the evidence and in a confirmation set"
        )

    delta_members: set[TimedComponent] = set()
    delta_assumptions: set[Assumption] = set()
    for k in conflicts:
        if contains(k):
            delta_members |= k.focused_members
            delta_assumptions |= k.assumptions

    transformed: list[EvidenceSet] = [k for k in conflicts if not contains(k)]
    for b in confirmations:
        if not contains(b):
            continue
        members = frozenset(
            tc for tc in b.members
            if tc not in delta_members
            and not (isinstance(e, str) and tc.component == e)
            and tc != e
        )
        assumptions = frozenset(
            a for a in b.assumptions if a not in delta_assumptions and a != e
        )
        if not members and not assumptions:
            continue
        transformed.append(
            EvidenceSet(
                kind="conflict",
                origin=b.origin,
                members=members,
                focused_members=members,
                assumptions=assumptions,
            )
        )
    if not transformed:
        return FocusSet(focuses=())

    label = e.label() if isinstance(e, (TimedComponent, Assumption)) else str(e)
    k_counts: Counter = Counter()
    for k in transformed:
        k_counts.update(k.focused_universe())
    focuses = []
    for seed in transformed:
        candidates = sorted(seed.focused_universe(), key=member_label)
        if not candidates:
            continue
        best = max(k_counts[m] for m in candidates)
        winners = [m for m in candidates if k_counts[m] == best]
        focuses.append(_make_focus(winners, best, under=label))
    return minimize(focuses)


def apply_rule(
    rule: str, evidence: Iterable[EvidenceSet], mode: Mode = "nonintermittent"
) -> FocusSet:
    rule = rule.lower()
    if rule == "r1":
        return focus_rule1(evidence)
    if rule == "r2":
        return focus_rule2(evidence)
    if rule == "r3":
        return focus_rule3(evidence, mode)
    if rule == "r4":
        return focus_rule4(evidence, mode)
    raise ValueError(f"unknown rule {rule!r}")
