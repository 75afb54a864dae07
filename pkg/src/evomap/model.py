"""In-memory ontology versions.

An ontology version is an immutable snapshot of concepts, concept
attributes and directed relationships.  Relationships run from the child
end (source) to the parent end (target) and must form a DAG.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import EvomapError

# Characters that can never appear in identifiers, attribute names/values
# or relationship types: they would break the tab-separated native format.
_FORBIDDEN = ("\t", "\n", "\r")


@dataclass(frozen=True)
class Relationship:
    """Directed relationship triple; source is the child end."""

    source: str
    type: str
    target: str


@dataclass(frozen=True)
class Attribute:
    """Concept attribute triple (concept, name, value)."""

    concept: str
    name: str
    value: str


@dataclass(frozen=True)
class Ontology:
    """One ontology version. Immutable after construction."""

    version_label: str = ""
    concepts: frozenset[str] = frozenset()
    relationships: frozenset[Relationship] = frozenset()
    attributes: frozenset[Attribute] = frozenset()

    def with_label(self, label: str) -> Ontology:
        return Ontology(label, self.concepts, self.relationships, self.attributes)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _bad_text(value: str) -> bool:
    return value == "" or any(ch in value for ch in _FORBIDDEN)


def validate(o: Ontology) -> ValidationReport:
    """Check every structural invariant; violations are data, not failures."""
    report = ValidationReport()
    v = report.violations

    for c in sorted(o.concepts):
        if _bad_text(c):
            v.append(f"bad concept id: {c!r}")
    for r in sorted(o.relationships, key=lambda r: (r.source, r.type, r.target)):
        if _bad_text(r.type):
            v.append(f"bad relationship type: {r!r}")
        if r.source == r.target:
            v.append(f"self relationship: {r.source}")
        if r.source not in o.concepts:
            v.append(f"relationship source not declared: {r.source}")
        if r.target not in o.concepts:
            v.append(f"relationship target not declared: {r.target}")
    for a in sorted(o.attributes, key=lambda a: (a.concept, a.name, a.value)):
        if a.concept not in o.concepts:
            v.append(f"attribute concept not declared: {a.concept}")
        if _bad_text(a.name) or any(ch in a.value for ch in _FORBIDDEN):
            v.append(f"bad attribute field: {a!r}")

    if not o.concepts:
        v.append("no root")
    else:
        sources = {r.source for r in o.relationships}
        roots = sorted(o.concepts - sources)
        if not roots:
            v.append("no root")
        elif len(roots) > 1:
            report.warnings.append("multiple roots: " + ",".join(roots))

    cycle = _find_cycle(o)
    if cycle:
        v.append("cycle: " + ",".join(cycle))
    return report


def _find_cycle(o: Ontology) -> list[str] | None:
    """Kahn's algorithm; returns the sorted residue if a cycle exists."""
    indegree = {c: 0 for c in o.concepts}
    children: dict[str, list[str]] = {c: [] for c in o.concepts}
    for r in o.relationships:
        if r.source in indegree and r.target in indegree:
            # Walk child -> parent: count edges into the parent side.
            children[r.source].append(r.target)
            indegree[r.target] += 1
    queue = deque(c for c, d in indegree.items() if d == 0)
    seen = 0
    while queue:
        c = queue.popleft()
        seen += 1
        for p in children[c]:
            indegree[p] -= 1
            if indegree[p] == 0:
                queue.append(p)
    if seen == len(o.concepts):
        return None
    return sorted(c for c, d in indegree.items() if d > 0)


def elements(o: Ontology) -> frozenset[tuple]:
    """Tagged element set used for version comparison and migration checks."""
    out: set[tuple] = {("concept", c) for c in o.concepts}
    out.update(("relationship", (r.source, r.type, r.target)) for r in o.relationships)
    out.update(("attribute", (a.concept, a.name, a.value)) for a in o.attributes)
    return frozenset(out)


def from_elements(label: str, elems: frozenset[tuple]) -> Ontology:
    """Inverse of elements(); used by migration to rebuild a version."""
    concepts = frozenset(e[1] for e in elems if e[0] == "concept")
    rels = frozenset(Relationship(*e[1]) for e in elems if e[0] == "relationship")
    attrs = frozenset(Attribute(*e[1]) for e in elems if e[0] == "attribute")
    return Ontology(label, concepts, rels, attrs)


def neighbors(o: Ontology, concept: str) -> tuple[set[str], set[str]]:
    """(parents, children) of a concept along relationship direction."""
    if concept not in o.concepts:
        raise EvomapError(f"unknown concept id: {concept}")
    parents = {r.target for r in o.relationships if r.source == concept}
    children = {r.source for r in o.relationships if r.target == concept}
    return parents, children


def adjacency(o: Ontology) -> tuple[dict[str, list[str]], dict[str, list[str]]]:
    """Full (parents_of, children_of) maps, each value list sorted."""
    parents: dict[str, list[str]] = {c: [] for c in o.concepts}
    children: dict[str, list[str]] = {c: [] for c in o.concepts}
    for r in o.relationships:
        parents[r.source].append(r.target)
        children[r.target].append(r.source)
    for m in (parents, children):
        for lst in m.values():
            lst.sort()
    return parents, children


def roots(o: Ontology) -> list[str]:
    sources = {r.source for r in o.relationships}
    return sorted(o.concepts - sources)
