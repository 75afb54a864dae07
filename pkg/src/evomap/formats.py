"""Parsers and serializers for the on-disk formats.

All serializers are canonical: element order is sorted by code point, so
two serializations of the same value are byte-identical.  Identifiers in
diff documents are emitted bare unless they contain grammar
metacharacters or whitespace, in which case they are double-quoted with
"" escaping.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .changeops import ChangeOp, DiffMapping, op, quote_id
from .errors import LineageError, MatchError, ParseError, ValidationError
from .matching import MatchMapping
from .model import Attribute, Ontology, Relationship, validate

DIFF_HEADER_PREFIX = "#evomap-diff v1"

# ---------------------------------------------------------------------------
# shared id tokenizer (diff grammar)
# ---------------------------------------------------------------------------

_BARE_STOP = {",", ")", "}"}
_BARE_BAD = {"(", "{", '"'}


def _read_id(text: str, i: int) -> tuple[str, int]:
    """Read one identifier starting at i; returns (id, next_index)."""
    n = len(text)
    while i < n and text[i] == " ":
        i += 1
    if i >= n:
        raise ParseError("unexpected end of input, expected identifier")
    if text[i] == '"':
        i += 1
        out = []
        while True:
            if i >= n:
                raise ParseError("unterminated quoted identifier")
            ch = text[i]
            if ch == '"':
                if i + 1 < n and text[i + 1] == '"':
                    out.append('"')
                    i += 2
                    continue
                i += 1
                break
            out.append(ch)
            i += 1
        return "".join(out), i
    start = i
    while i < n and text[i] not in _BARE_STOP:
        if text[i] in _BARE_BAD:
            raise ParseError(f"unexpected {text[i]!r} in bare identifier")
        i += 1
    token = text[start:i].strip()
    if not token:
        raise ParseError("empty identifier")
    return token, i


def _expect(text: str, i: int, ch: str) -> int:
    while i < len(text) and text[i] == " ":
        i += 1
    if i >= len(text) or text[i] != ch:
        got = text[i] if i < len(text) else "end of input"
        raise ParseError(f"expected {ch!r}, got {got!r}")
    return i + 1


def parse_op(text: str) -> ChangeOp:
    """Parse one canonical change-operation expression."""
    text = text.strip()
    paren = text.find("(")
    if paren <= 0:
        raise ParseError(f"malformed change operation: {text!r}")
    kind = text[:paren].strip()
    i = paren + 1
    args = []
    n = len(text)
    while True:
        while i < n and text[i] == " ":
            i += 1
        if i >= n:
            raise ParseError("unexpected end of input in argument list")
        ch = text[i]
        if ch == "{":
            i += 1
            members = []
            while True:
                member, i = _read_id(text, i)
                members.append(member)
                while i < n and text[i] == " ":
                    i += 1
                if i < n and text[i] == ",":
                    i += 1
                    continue
                i = _expect(text, i, "}")
                break
            args.append(frozenset(members))
        elif ch == "(":
            i += 1
            parts = []
            for k in range(3):
                part, i = _read_id(text, i)
                parts.append(part)
                i = _expect(text, i, "," if k < 2 else ")")
            args.append(tuple(parts))
        else:
            ident, i = _read_id(text, i)
            args.append(ident)
        while i < n and text[i] == " ":
            i += 1
        if i < n and text[i] == ",":
            i += 1
            continue
        i = _expect(text, i, ")")
        break
    if text[i:].strip():
        raise ParseError(f"trailing garbage after operation: {text[i:].strip()!r}")
    return op(kind, *args)


# ---------------------------------------------------------------------------
# native ontology documents
# ---------------------------------------------------------------------------

_SECTIONS = ("[concepts]", "[relationships]", "[attributes]")


def parse_ontology(text: str, version_label: str = "") -> Ontology:
    """Parse and validate a native ontology document."""
    concepts: set[str] = set()
    rels: set[Relationship] = set()
    attrs: set[Attribute] = set()
    label = ""
    section = None
    section_rank = -1
    pending_rel_lines: list[tuple[int, str]] = []
    pending_attr_lines: list[tuple[int, str]] = []

    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        if line.startswith("#"):
            if line.startswith("#version:") and not label:
                label = line[len("#version:") :].strip()
            continue
        if line.startswith("[") and line.endswith("]"):
            if line not in _SECTIONS:
                raise ParseError(f"unknown section {line}", lineno)
            rank = _SECTIONS.index(line)
            if rank <= section_rank:
                raise ParseError(f"section {line} out of order", lineno)
            section_rank = rank
            section = line
            continue
        if section == "[concepts]":
            if line in concepts:
                raise ParseError(f"duplicate concept: {line}", lineno)
            concepts.add(line)
        elif section == "[relationships]":
            pending_rel_lines.append((lineno, line))
        elif section == "[attributes]":
            pending_attr_lines.append((lineno, line))
        else:
            raise ParseError("content before [concepts] section", lineno)

    for lineno, line in pending_rel_lines:
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError("relationship line needs 3 tab-separated fields", lineno)
        source, rtype, target = parts
        for cid in (source, target):
            if cid not in concepts:
                raise ParseError(f"undeclared id: {cid}", lineno)
        rel = Relationship(source, rtype, target)
        if rel in rels:
            raise ParseError(f"duplicate relationship: {line}", lineno)
        rels.add(rel)
    for lineno, line in pending_attr_lines:
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError("attribute line needs 3 tab-separated fields", lineno)
        concept, name, value = parts
        if concept not in concepts:
            raise ParseError(f"undeclared id: {concept}", lineno)
        attr = Attribute(concept, name, value)
        if attr in attrs:
            raise ParseError(f"duplicate attribute: {line}", lineno)
        attrs.add(attr)

    o = Ontology(
        label or version_label, frozenset(concepts), frozenset(rels), frozenset(attrs)
    )
    report = validate(o)
    if not report.ok:
        raise ValidationError("; ".join(report.violations))
    return o


def serialize_ontology(o: Ontology) -> str:
    lines = []
    if o.version_label:
        lines.append(f"#version: {o.version_label}")
    lines.append("[concepts]")
    lines.extend(sorted(o.concepts))
    lines.append("[relationships]")
    lines.extend(
        f"{r.source}\t{r.type}\t{r.target}"
        for r in sorted(o.relationships, key=lambda r: (r.source, r.type, r.target))
    )
    lines.append("[attributes]")
    lines.extend(
        f"{a.concept}\t{a.name}\t{a.value}"
        for a in sorted(o.attributes, key=lambda a: (a.concept, a.name, a.value))
    )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# match documents
# ---------------------------------------------------------------------------


def parse_match(text: str, o1: Ontology, o2: Ontology) -> MatchMapping:
    """Lines of old_id<TAB>new_id; ids must resolve in their versions."""
    pairs = set()
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise MatchError(f"line {lineno}: match line needs 2 tab-separated fields")
        old_id, new_id = parts
        if old_id not in o1.concepts:
            raise MatchError(f"line {lineno}: unknown old id: {old_id}")
        if new_id not in o2.concepts:
            raise MatchError(f"line {lineno}: unknown new id: {new_id}")
        pairs.add((old_id, new_id))
    return MatchMapping(frozenset(pairs))


def serialize_match(m: MatchMapping) -> str:
    return "".join(f"{a}\t{b}\n" for a, b in sorted(m.pairs))


# ---------------------------------------------------------------------------
# diff documents
# ---------------------------------------------------------------------------

_DEAD_PREFIX = "# dead: "


def serialize_diff(d: DiffMapping) -> str:
    """Canonical diff document.

    Live operations appear as plain grammar lines; eliminated operations
    are kept as '# dead:' comment lines so the lineage graph survives a
    round trip while naive consumers see only the live mapping.
    """
    header = f"{DIFF_HEADER_PREFIX} kind={d.kind}"
    if d.old_label or d.new_label:
        header += f" old={quote_id(d.old_label)} new={quote_id(d.new_label)}"
    lines = [header]
    for rec in sorted(d.records.values(), key=lambda r: r.op_id):
        ann = f"id={rec.op_id}"
        if rec.consumed:
            ann += " consumed=" + ",".join(str(i) for i in rec.consumed)
        body = f"{rec.op.canonical}\t# {ann}"
        lines.append(body if rec.live else _DEAD_PREFIX + body)
    return "\n".join(lines) + "\n"


def _parse_header(line: str) -> tuple[str, str, str]:
    rest = line[len(DIFF_HEADER_PREFIX) :].strip()
    if not rest.startswith("kind="):
        raise ParseError("diff header missing kind=", 1)
    rest = rest[len("kind=") :]
    kind = rest.split(" ", 1)[0]
    if kind not in ("basic", "compact", "working"):
        raise ParseError(f"unknown diff kind: {kind}", 1)
    rest = rest[len(kind) :].strip()
    old_label = new_label = ""
    if rest:
        if not rest.startswith("old="):
            raise ParseError("malformed diff header", 1)
        old_label, i = _read_id(rest, len("old="))
        rest = rest[i:].strip()
        if not rest.startswith("new="):
            raise ParseError("malformed diff header", 1)
        new_label, i = _read_id(rest, len("new="))
        if rest[i:].strip():
            raise ParseError("malformed diff header", 1)
    return kind, old_label, new_label


def parse_diff(text: str) -> DiffMapping:
    lines = text.split("\n")
    if not lines or not lines[0].startswith(DIFF_HEADER_PREFIX):
        raise ParseError("missing diff header", 1)
    kind, old_label, new_label = _parse_header(lines[0])
    d = DiffMapping(kind, old_label, new_label)
    entries: list[tuple[int, ChangeOp, bool, int | None, tuple[int, ...]]] = []
    seq = 0
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        live = True
        if line.startswith(_DEAD_PREFIX):
            live = False
            line = line[len(_DEAD_PREFIX) :]
        elif line.startswith("#"):
            continue
        body, _, ann = line.partition("\t#")
        op_id: int | None = None
        consumed: tuple[int, ...] = ()
        for token in ann.split():
            if token.startswith("id="):
                try:
                    op_id = int(token[3:])
                except ValueError:
                    raise ParseError(f"bad id annotation: {token}", lineno) from None
            elif token.startswith("consumed="):
                try:
                    consumed = tuple(
                        sorted(int(p) for p in token[len("consumed=") :].split(","))
                    )
                except ValueError:
                    raise ParseError(f"bad consumed annotation: {token}", lineno) from None
            else:
                raise ParseError(f"unknown annotation: {token}", lineno)
        try:
            parsed = parse_op(body)
        except ParseError as exc:
            raise ParseError(str(exc), lineno) from None
        seq += 1
        entries.append((lineno, parsed, live, op_id if op_id is not None else seq, consumed))

    for lineno, parsed, live, op_id, consumed in entries:
        if op_id in d.records:
            raise ParseError(f"duplicate op id {op_id}", lineno)
        d.add(
            parsed,
            created_by="file",
            consumed=consumed,
            op_id=op_id,
            live=live,
            eliminated_by=None if live else "file",
        )
    ids = set(d.records)
    for rec in d.records.values():
        for ref in rec.consumed:
            if ref not in ids:
                raise ParseError(f"lineage references unknown op id {ref}")
    _check_lineage_acyclic(d)
    return d


def _check_lineage_acyclic(d: DiffMapping) -> None:
    state: dict[int, int] = {}

    def visit(i: int) -> None:
        stack = [(i, iter(d.records[i].consumed))]
        state[i] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for child in it:
                mark = state.get(child)
                if mark == 1:
                    raise LineageError(f"lineage cycle through op id {child}")
                if mark is None:
                    state[child] = 1
                    stack.append((child, iter(d.records[child].consumed)))
                    advanced = True
                    break
            if not advanced:
                state[node] = 2
                stack.pop()

    for i in d.records:
        if state.get(i) is None:
            visit(i)


# ---------------------------------------------------------------------------
# OBO subset
# ---------------------------------------------------------------------------


@dataclass
class OboResult:
    ontology: Ontology
    ignored: Counter = field(default_factory=Counter)
    warnings: list[str] = field(default_factory=list)


def _obo_value(line: str) -> str:
    value = line.split("!", 1)[0].strip()
    return value


def _obo_def_value(value: str) -> str:
    if not value.startswith('"'):
        return value
    out = []
    i = 1
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            out.append(value[i + 1])
            i += 2
            continue
        if ch == '"':
            break
        out.append(ch)
        i += 1
    return "".join(out)


def parse_obo(text: str, dangling: str = "error") -> OboResult:
    """Read the [Term] subset of an OBO file into an ontology.

    Handled fields: id, name, def, is_obsolete, is_a, relationship.
    Everything else is ignored and counted.  Unlike the native reader the
    result is not validated here; run validate() downstream.
    """
    if dangling not in ("error", "drop"):
        raise ValueError("dangling must be 'error' or 'drop'")
    ignored: Counter = Counter()
    warnings: list[str] = []
    label = ""
    terms: list[dict] = []
    term: dict | None = None
    in_term = False
    term_line = 0

    def close_term(lineno: int):
        nonlocal term
        if term is not None:
            if "id" not in term:
                raise ParseError("[Term] stanza without id", term_line)
            terms.append(term)
        term = None

    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("!"):
            continue
        if line.startswith("["):
            close_term(lineno)
            in_term = line == "[Term]"
            if in_term:
                term = {"rels": [], "attrs": [], "line": lineno}
                term_line = lineno
            else:
                ignored[line] += 1
            continue
        if not in_term:
            if line.startswith("data-version:") and not label:
                label = line.split(":", 1)[1].strip()
            else:
                ignored["header:" + line.split(":", 1)[0]] += 1
            continue
        if ":" not in line:
            raise ParseError(f"malformed OBO line: {line!r}", lineno)
        key, value = line.split(":", 1)
        key = key.strip()
        value = _obo_value(value)
        assert term is not None
        if key == "id":
            if "id" in term:
                raise ParseError("duplicate id in [Term] stanza", lineno)
            term["id"] = value
        elif key == "name":
            term["attrs"].append(("name", value))
        elif key == "def":
            term["attrs"].append(("definition", _obo_def_value(value)))
        elif key == "is_obsolete":
            term["attrs"].append(("obsolete", value))
        elif key == "is_a":
            term["rels"].append(("is_a", value, lineno))
        elif key == "relationship":
            parts = value.split()
            if len(parts) < 2:
                raise ParseError(f"malformed relationship line: {line!r}", lineno)
            term["rels"].append((parts[0], parts[1], lineno))
        else:
            ignored[key] += 1
    close_term(len(text.split("\n")))

    concepts = set()
    for t in terms:
        if t["id"] in concepts:
            raise ParseError(f"duplicate term id: {t['id']}", t["line"])
        concepts.add(t["id"])
    rels: set[Relationship] = set()
    attrs: set[Attribute] = set()
    for t in terms:
        for name, value in t["attrs"]:
            attrs.add(Attribute(t["id"], name, value))
        for rtype, target, lineno in t["rels"]:
            if target not in concepts:
                if dangling == "error":
                    raise ParseError(f"dangling relationship target: {target}", lineno)
                warnings.append(f"dropped dangling relationship: {t['id']} -> {target}")
                continue
            rels.add(Relationship(t["id"], rtype, target))

    o = Ontology(label, frozenset(concepts), frozenset(rels), frozenset(attrs))
    return OboResult(o, ignored, warnings)
