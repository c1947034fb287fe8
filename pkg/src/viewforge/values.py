"""Runtime values of the finite-domain language.

Every value knows enough to be rendered and totally ordered without a
universe at hand: enum values carry their declaration index, object
identifiers their pool index.  Ordering (``value_key``) is the single
source of determinism for enumeration, trace rendering and reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class EnumValue:
    sort: str
    name: str
    index: int = field(compare=False)

    def __repr__(self) -> str:
        return f"{self.name}"


@dataclass(frozen=True)
class IntValue:
    # sort is metadata: 2 in Date equals 2 in any other range sort.
    sort: str | None = field(compare=False)
    n: int = 0

    def __repr__(self) -> str:
        return str(self.n)


@dataclass(frozen=True)
class ObjectId:
    cls: str
    index: int

    def __repr__(self) -> str:
        return f"{self.cls}#{self.index}"


class _External:
    """The environment endpoint: sender of stimuli, sink for replies."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EXTERNAL"


EXTERNAL = _External()


@dataclass(frozen=True)
class SetValue:
    # element sort is recoverable from the members; {} equals any empty set.
    elems: frozenset

    def __repr__(self) -> str:
        inner = " , ".join(render_value(e) for e in sorted(self.elems, key=value_key))
        return "{ " + inner + " }" if inner else "{}"


@dataclass(frozen=True)
class MsgValue:
    """A message: sender and receiver endpoints plus body (name + args)."""

    sender: object
    receiver: object
    name: str
    args: tuple

    def __repr__(self) -> str:
        return render_value(self)


@dataclass(frozen=True)
class SeqValue:
    msgs: tuple

    def __repr__(self) -> str:
        return render_value(self)


Value = object

_KIND_RANK = {
    _External: 0,
    IntValue: 1,
    EnumValue: 2,
    ObjectId: 3,
    SetValue: 4,
    MsgValue: 5,
    SeqValue: 6,
}


def value_key(v) -> tuple:
    """Total order over all values; drives every deterministic ordering."""
    rank = _KIND_RANK[type(v)]
    if isinstance(v, _External):
        return (rank,)
    if isinstance(v, IntValue):
        return (rank, v.n)
    if isinstance(v, EnumValue):
        return (rank, v.sort, v.index)
    if isinstance(v, ObjectId):
        return (rank, v.cls, v.index)
    if isinstance(v, SetValue):
        return (rank, len(v.elems), tuple(sorted(value_key(e) for e in v.elems)))
    if isinstance(v, MsgValue):
        return (rank, value_key(v.sender), value_key(v.receiver), v.name,
                tuple(value_key(a) for a in v.args))
    if isinstance(v, SeqValue):
        return (rank, tuple(value_key(m) for m in v.msgs))
    raise TypeError(f"not a value: {v!r}")


def render_value(v) -> str:
    """Canonical text for a value (reused by traces, reports, witnesses)."""
    if isinstance(v, (_External, IntValue, EnumValue, ObjectId)):
        return repr(v)
    if isinstance(v, SetValue):
        if not v.elems:
            return "{}"
        inner = " , ".join(render_value(e) for e in sorted(v.elems, key=value_key))
        return "{ " + inner + " }"
    if isinstance(v, MsgValue):
        args = " , ".join(render_value(a) for a in v.args)
        return f"{render_value(v.sender)}->{render_value(v.receiver)}:{v.name}({args})"
    if isinstance(v, SeqValue):
        return "[" + " ; ".join(render_value(m) for m in v.msgs) + "]"
    raise TypeError(f"not a value: {v!r}")


def is_external(v) -> bool:
    return isinstance(v, _External)
