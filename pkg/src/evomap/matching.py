"""Concept correspondences between two ontology versions.

A match mapping is a plain set of (old, new) id pairs.  A concept may
take part in several pairs: multi-matches are how merges and splits reach
the rule engine.  Heuristic matchers here never fabricate 1:n pairs; only
identical-signature collisions or external match files introduce them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import MatchError
from .model import Ontology, adjacency, roots


@dataclass(frozen=True)
class MatchMapping:
    pairs: frozenset[tuple[str, str]] = frozenset()

    def inverse(self) -> MatchMapping:
        return MatchMapping(frozenset((b, a) for a, b in self.pairs))

    def domains(self) -> set[str]:
        return {a for a, _ in self.pairs}

    def ranges(self) -> set[str]:
        return {b for _, b in self.pairs}

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(sorted(self.pairs))


@dataclass
class MatchReport:
    violations: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def match_by_id(o1: Ontology, o2: Ontology) -> MatchMapping:
    """Pair concepts whose identifiers exist in both versions."""
    return MatchMapping(frozenset((c, c) for c in o1.concepts & o2.concepts))


_WS = re.compile(r"\s+")


def _normalize(label: str) -> str:
    return _WS.sub(" ", label.strip()).casefold()


def _labels(o: Ontology, label_attr: str) -> dict[str, str]:
    """Concept id -> normalized label; the id itself when unattributed."""
    values: dict[str, list[str]] = {}
    for a in o.attributes:
        if a.name == label_attr:
            values.setdefault(a.concept, []).append(a.value)
    out = {}
    for c in o.concepts:
        vals = values.get(c)
        out[c] = _normalize(min(vals)) if vals else _normalize(c)
    return out


def _path_signatures(o: Ontology, labels: dict[str, str]) -> dict[str, tuple]:
    """Concept -> sorted multiset of root-path label sequences.

    A DAG concept can lie on several root paths; the signature keeps all
    of them (with multiplicity), which is the conservative reading for
    context-based matching.
    """
    parents, _ = adjacency(o)
    root_set = set(roots(o))
    memo: dict[str, tuple[tuple[str, ...], ...]] = {}

    def paths_to_root(c: str) -> tuple[tuple[str, ...], ...]:
        got = memo.get(c)
        if got is not None:
            return got
        if c in root_set:
            result: tuple[tuple[str, ...], ...] = ((labels[c],),)
        else:
            acc = []
            for p in parents[c]:
                for path in paths_to_root(p):
                    acc.append(path + (labels[c],))
            result = tuple(sorted(acc))
        memo[c] = result
        return result

    return {c: paths_to_root(c) for c in o.concepts}


def match_by_label_path(
    o1: Ontology, o2: Ontology, label_attr: str = "label"
) -> MatchMapping:
    """Pair concepts with equal labels and equal root-path label contexts."""
    l1, l2 = _labels(o1, label_attr), _labels(o2, label_attr)
    sig1 = _path_signatures(o1, l1)
    sig2 = _path_signatures(o2, l2)
    by_sig: dict[tuple, list[str]] = {}
    for c, sig in sig2.items():
        by_sig.setdefault((l2[c], sig), []).append(c)
    pairs = set()
    for c, sig in sig1.items():
        for d in by_sig.get((l1[c], sig), ()):
            pairs.add((c, d))
    return MatchMapping(frozenset(pairs))


def validate_match(m: MatchMapping, o1: Ontology, o2: Ontology) -> MatchReport:
    """Referential integrity only; multi-matches are legal and just noted."""
    report = MatchReport()
    out_degree: dict[str, int] = {}
    in_degree: dict[str, int] = {}
    for a, b in sorted(m.pairs):
        if a not in o1.concepts:
            report.violations.append(f"unknown old id: {a}")
        if b not in o2.concepts:
            report.violations.append(f"unknown new id: {b}")
        out_degree[a] = out_degree.get(a, 0) + 1
        in_degree[b] = in_degree.get(b, 0) + 1
    for c in sorted(c for c, n in out_degree.items() if n > 1):
        report.notes.append(f"multi-match: {c} ({out_degree[c]} outgoing)")
    for c in sorted(c for c, n in in_degree.items() if n > 1):
        report.notes.append(f"multi-match: {c} ({in_degree[c]} incoming)")
    if not m.pairs:
        report.notes.append("0 matched")
    return report


def require_valid(m: MatchMapping, o1: Ontology, o2: Ontology) -> None:
    report = validate_match(m, o1, o2)
    if not report.ok:
        raise MatchError("; ".join(report.violations))
