"""Change operations, canonical serialization, inverses and diff mappings.

A diff mapping is the evolving working set of change operations plus the
lineage graph recording which operations a created operation replaced.
Flattening the lineage of a compact mapping recovers the basic mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

from .errors import EvomapError, LineageError

# Argument sorts per operation kind: "id" a concept identifier, "triple" a
# relationship or attribute triple, "set" a non-empty identifier set.
SIGNATURES: dict[str, tuple[str, ...]] = {
    "addC": ("id",),
    "delC": ("id",),
    "mapC": ("id", "id"),
    "addR": ("triple",),
    "delR": ("triple",),
    "mapR": ("triple", "triple"),
    "addA": ("triple",),
    "delA": ("triple",),
    "mapA": ("triple", "triple"),
    "substitute": ("id", "id"),
    "move": ("id", "id", "id"),
    "toObsolete": ("id",),
    "revokeObsolete": ("id",),
    "addLeaf": ("id", "set"),
    "delLeaf": ("id", "set"),
    "merge": ("set", "id"),
    "split": ("id", "set"),
    "addSubGraph": ("id", "set"),
    "delSubGraph": ("id", "set"),
}

BASIC_KINDS = frozenset(
    {"addC", "delC", "mapC", "addR", "delR", "mapR", "addA", "delA", "mapA"}
)
COMPLEX_KINDS = frozenset(SIGNATURES) - BASIC_KINDS

# Inverse table: kind -> (inverse kind, argument permutation).
_INVERSES: dict[str, tuple[str, tuple[int, ...]]] = {
    "addC": ("delC", (0,)),
    "delC": ("addC", (0,)),
    "mapC": ("mapC", (1, 0)),
    "addR": ("delR", (0,)),
    "delR": ("addR", (0,)),
    "mapR": ("mapR", (1, 0)),
    "addA": ("delA", (0,)),
    "delA": ("addA", (0,)),
    "mapA": ("mapA", (1, 0)),
    "substitute": ("substitute", (1, 0)),
    "move": ("move", (0, 2, 1)),
    "toObsolete": ("revokeObsolete", (0,)),
    "revokeObsolete": ("toObsolete", (0,)),
    "addLeaf": ("delLeaf", (0, 1)),
    "delLeaf": ("addLeaf", (0, 1)),
    "merge": ("split", (1, 0)),
    "split": ("merge", (1, 0)),
    "addSubGraph": ("delSubGraph", (0, 1)),
    "delSubGraph": ("addSubGraph", (0, 1)),
}

_QUOTE_TRIGGERS = set('(){},"') | {" ", "\t", "\n", "\r"}


@lru_cache(maxsize=None)
def quote_id(value: str) -> str:
    """Emit bare unless the id contains grammar metacharacters or whitespace."""
    if value and not any(ch in _QUOTE_TRIGGERS for ch in value):
        return value
    return '"' + value.replace('"', '""') + '"'


def _render_arg(arg) -> str:
    if isinstance(arg, str):
        return quote_id(arg)
    if isinstance(arg, tuple):
        return "(" + ",".join(quote_id(p) for p in arg) + ")"
    return "{" + ",".join(quote_id(p) for p in sorted(arg)) + "}"


@dataclass(frozen=True, eq=False)
class ChangeOp:
    """One change operation; equality and hashing use the canonical form."""

    kind: str
    args: tuple
    canonical: str = field(init=False, repr=False)

    def __post_init__(self):
        sig = SIGNATURES.get(self.kind)
        if sig is None:
            raise EvomapError(f"unknown change operation kind: {self.kind}")
        if len(self.args) != len(sig):
            raise EvomapError(
                f"{self.kind} takes {len(sig)} argument(s), got {len(self.args)}"
            )
        norm = []
        for sort, arg in zip(sig, self.args):
            if sort == "id":
                if not isinstance(arg, str):
                    raise EvomapError(f"{self.kind}: expected identifier, got {arg!r}")
            elif sort == "triple":
                if not (
                    isinstance(arg, tuple)
                    and len(arg) == 3
                    and all(isinstance(p, str) for p in arg)
                ):
                    raise EvomapError(f"{self.kind}: expected triple, got {arg!r}")
            else:
                arg = arg if isinstance(arg, frozenset) else frozenset(arg)
                if not arg or not all(isinstance(p, str) for p in arg):
                    raise EvomapError(f"{self.kind}: expected non-empty id set")
            norm.append(arg)
        object.__setattr__(self, "args", tuple(norm))
        rendered = ",".join(_render_arg(a) for a in norm)
        object.__setattr__(self, "canonical", f"{self.kind}({rendered})")

    def __eq__(self, other):
        return isinstance(other, ChangeOp) and self.canonical == other.canonical

    def __hash__(self):
        return hash(self.canonical)

    def __str__(self):
        return self.canonical

    @property
    def is_basic(self) -> bool:
        return self.kind in BASIC_KINDS


def op(kind: str, *args) -> ChangeOp:
    """Build a change operation; set arguments may be any iterable of ids."""
    return ChangeOp(kind, args)


def invert_op(o: ChangeOp) -> ChangeOp:
    """The unique inverse operation (argument permutation per kind)."""
    inv_kind, perm = _INVERSES[o.kind]
    return ChangeOp(inv_kind, tuple(o.args[i] for i in perm))


@dataclass
class OpRecord:
    """One entry in a diff mapping's history: op, liveness, lineage."""

    op_id: int
    op: ChangeOp
    live: bool = True
    created_by: str = ""
    eliminated_by: str | None = None
    consumed: tuple[int, ...] = ()


class DiffMapping:
    """Mutable-by-the-engine set of change operations with lineage.

    Live operations are pairwise distinct under canonical form.  Completed
    mappings (kind "basic" or "compact") are treated as immutable values.
    """

    def __init__(self, kind: str = "working", old_label: str = "", new_label: str = ""):
        if kind not in ("basic", "working", "compact"):
            raise EvomapError(f"bad diff mapping kind: {kind}")
        self.kind = kind
        self.old_label = old_label
        self.new_label = new_label
        self.records: dict[int, OpRecord] = {}
        self.basic_canonicals: frozenset[str] | None = None
        self.agg_iterations: int | None = None
        self._live_by_canonical: dict[str, int] = {}
        self._id_by_canonical: dict[str, int] = {}
        self._next_id = 1

    # -- construction ----------------------------------------------------

    def add(
        self,
        o: ChangeOp,
        created_by: str = "",
        consumed: tuple[int, ...] = (),
        op_id: int | None = None,
        live: bool = True,
        eliminated_by: str | None = None,
    ) -> tuple[int, bool]:
        """Insert an op; a live duplicate merges lineage instead.

        Returns (op_id, created) where created is False on deduplication.
        """
        existing = self._live_by_canonical.get(o.canonical)
        if existing is not None and live:
            rec = self.records[existing]
            merged = set(rec.consumed) | set(consumed)
            merged.discard(existing)
            rec.consumed = tuple(sorted(merged))
            return existing, False
        if op_id is None:
            op_id = self._next_id
        if op_id in self.records:
            raise EvomapError(f"duplicate op id: {op_id}")
        self._next_id = max(self._next_id, op_id + 1)
        rec = OpRecord(op_id, o, live, created_by, eliminated_by, tuple(sorted(consumed)))
        self.records[op_id] = rec
        self._id_by_canonical[o.canonical] = op_id
        if live:
            self._live_by_canonical[o.canonical] = op_id
        return op_id, True

    def eliminate(self, op_id: int, by: str) -> bool:
        rec = self.records[op_id]
        if not rec.live:
            return False
        rec.live = False
        rec.eliminated_by = by
        del self._live_by_canonical[rec.op.canonical]
        return True

    # -- queries ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self._live_by_canonical)

    def is_live(self, o: ChangeOp) -> bool:
        return o.canonical in self._live_by_canonical

    def live_id(self, o: ChangeOp) -> int | None:
        return self._live_by_canonical.get(o.canonical)

    def id_for(self, o: ChangeOp) -> int | None:
        """Id of the most recent record for this op, live or eliminated."""
        return self._id_by_canonical.get(o.canonical)

    def live_records(self) -> list[OpRecord]:
        return [r for r in self.records.values() if r.live]

    def live_ops(self) -> list[ChangeOp]:
        return [r.op for r in self.records.values() if r.live]

    def live_canonicals(self) -> frozenset[str]:
        return frozenset(self._live_by_canonical)

    def record_for(self, op_id: int) -> OpRecord:
        try:
            return self.records[op_id]
        except KeyError:
            raise EvomapError(f"unknown op id: {op_id}") from None

    # -- derived mappings --------------------------------------------------

    def copy(self, kind: str | None = None) -> DiffMapping:
        out = DiffMapping(kind or self.kind, self.old_label, self.new_label)
        for rec in self.records.values():
            out.records[rec.op_id] = replace(rec)
            out._id_by_canonical[rec.op.canonical] = rec.op_id
            if rec.live:
                out._live_by_canonical[rec.op.canonical] = rec.op_id
        out._next_id = self._next_id
        out.basic_canonicals = self.basic_canonicals
        out.agg_iterations = self.agg_iterations
        return out

    def lineage_leaves(self, op_id: int) -> frozenset[ChangeOp]:
        """Basic ops an operation flattens to.

        Follows lineage edges, stopping at members of the frozen basic
        mapping (or, without one, at records with no outgoing edges).
        """
        self.record_for(op_id)
        memo: dict[int, frozenset[ChangeOp]] = {}

        def walk(i: int) -> frozenset[ChangeOp]:
            got = memo.get(i)
            if got is not None:
                return got
            rec = self.records[i]
            stop = (
                rec.op.canonical in self.basic_canonicals
                if self.basic_canonicals is not None
                else not rec.consumed
            )
            if stop:
                if not rec.op.is_basic:
                    raise LineageError(
                        f"cannot flatten {rec.op.canonical}: no lineage recorded"
                    )
                out = frozenset((rec.op,))
            elif not rec.consumed:
                if rec.op.is_basic:
                    out = frozenset((rec.op,))
                else:
                    raise LineageError(
                        f"cannot flatten {rec.op.canonical}: no lineage recorded"
                    )
            else:
                acc: set[ChangeOp] = set()
                for child in rec.consumed:
                    acc.update(walk(child))
                out = frozenset(acc)
            memo[i] = out
            return out

        return walk(op_id)

    def expand_to_basic(self) -> DiffMapping:
        """Union of lineage leaves over live ops, as a fresh basic mapping."""
        leaves: set[ChangeOp] = set()
        for rec in self.live_records():
            leaves.update(self.lineage_leaves(rec.op_id))
        out = DiffMapping("basic", self.old_label, self.new_label)
        for o in sorted(leaves, key=lambda o: o.canonical):
            out.add(o, created_by="expand")
        return out

    def invert(self) -> DiffMapping:
        """Element-wise inverse; lineage preserved, version labels swapped."""
        out = DiffMapping(self.kind, self.new_label, self.old_label)
        for rec in self.records.values():
            inv = invert_op(rec.op)
            out.records[rec.op_id] = OpRecord(
                rec.op_id, inv, rec.live, rec.created_by, rec.eliminated_by, rec.consumed
            )
            out._id_by_canonical[inv.canonical] = rec.op_id
            if rec.live:
                out._live_by_canonical[inv.canonical] = rec.op_id
        out._next_id = self._next_id
        if self.basic_canonicals is not None:
            out.basic_canonicals = frozenset(
                invert_op(_parse_cache(c)).canonical for c in self.basic_canonicals
            )
        out.agg_iterations = self.agg_iterations
        return out

    def same_document(self, other: DiffMapping) -> bool:
        """Equality on kind, labels, op set, liveness and lineage graph."""
        if (self.kind, self.old_label, self.new_label) != (
            other.kind,
            other.old_label,
            other.new_label,
        ):
            return False
        mine = {
            r.op_id: (r.op.canonical, r.live, r.consumed) for r in self.records.values()
        }
        theirs = {
            r.op_id: (r.op.canonical, r.live, r.consumed) for r in other.records.values()
        }
        return mine == theirs


def _parse_cache(canonical: str) -> ChangeOp:
    # Local import: formats depends on this module, not vice versa.
    from .formats import parse_op

    return parse_op(canonical)
