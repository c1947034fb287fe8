"""Abstract syntax of the four view-document kinds."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import DocumentError

ONE = "1"
MANY = "*"


# ---------------------------------------------------------------------------
# Type documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SortDef:
    name: str
    # exactly one of the three is set
    literals: tuple | None = None          # enum literal names, declaration order
    int_range: tuple | None = None         # (lo, hi) inclusive
    set_of: object | None = None           # sort expression (str or ("set", ...))


@dataclass(frozen=True)
class TypeDocument:
    name: str
    sorts: tuple = ()

    def validate(self) -> None:
        seen = set()
        for sd in self.sorts:
            if sd.name in seen:
                raise DocumentError(f"duplicate sort {sd.name!r} in {self.name}")
            seen.add(sd.name)
            if sd.literals is not None:
                if len(set(sd.literals)) != len(sd.literals):
                    raise DocumentError(
                        f"duplicate literal in sort {sd.name!r}")
                if not sd.literals:
                    raise DocumentError(f"empty enumeration sort {sd.name!r}")
            if sd.int_range is not None:
                lo, hi = sd.int_range
                if lo > hi:
                    raise DocumentError(
                        f"empty integer range in sort {sd.name!r}")


# ---------------------------------------------------------------------------
# Object models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Role:
    cls: str
    rolename: str | None
    card: str  # ONE | MANY

    def key(self) -> tuple:
        return (self.cls, self.rolename or "", self.card)


@dataclass(frozen=True)
class Relationship:
    """An unordered pair of roles; stored with ends in canonical order."""
    first: Role
    second: Role

    @staticmethod
    def of(a: Role, b: Role) -> "Relationship":
        x, y = sorted((a, b), key=Role.key)
        return Relationship(x, y)

    def rolename_pair(self) -> tuple:
        return tuple(sorted((self.first.rolename or "", self.second.rolename or "")))

    def roles(self) -> tuple:
        return (self.first, self.second)


@dataclass(frozen=True)
class ObjectModelDoc:
    name: str
    classes: tuple = ()
    relationships: tuple = ()

    def validate(self) -> None:
        if len(set(self.classes)) != len(self.classes):
            raise DocumentError(f"duplicate class in {self.name}")
        declared = set(self.classes)
        pairs = set()
        for rel in self.relationships:
            for role in rel.roles():
                if role.cls not in declared:
                    raise DocumentError(
                        f"role class {role.cls!r} not declared in {self.name}")
                if role.card not in (ONE, MANY):
                    raise DocumentError(f"bad cardinality {role.card!r}")
            key = rel.rolename_pair()
            if key in pairs:
                raise DocumentError(
                    f"two relationships share rolename pair {key} in {self.name}")
            pairs.add(key)
        # rolenames read from one class end must be unique there
        seen: dict = {}
        for rel in self.relationships:
            for mine, other in (rel.roles(), rel.roles()[::-1]):
                if other.rolename is None:
                    continue
                key = (mine.cls, other.rolename)
                if key in seen:
                    raise DocumentError(
                        f"rolename {other.rolename!r} duplicated on class "
                        f"{mine.cls!r} in {self.name}")
                seen[key] = rel


# ---------------------------------------------------------------------------
# Class descriptions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MethodSig:
    name: str
    params: tuple = ()  # of (param name, sort expression)

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class ClassDescriptionDoc:
    name: str
    cls: str = ""
    attributes: tuple = ()  # of (name, sort expression)
    methods: tuple = ()

    def validate(self) -> None:
        names = [a for a, _ in self.attributes]
        if len(set(names)) != len(names):
            raise DocumentError(f"duplicate attribute in {self.name}")
        sigs = [(m.name, m.arity) for m in self.methods]
        if len(set(sigs)) != len(sigs):
            raise DocumentError(
                f"duplicate method name/arity in {self.name}")


# ---------------------------------------------------------------------------
# Lifecycle documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InputPattern:
    sender_var: str
    method: str
    vars: tuple = ()  # fresh variable names, one per argument


@dataclass(frozen=True)
class TransitionDef:
    tname: str
    source: str
    target: str
    input_pattern: InputPattern | None = None
    output_patterns: tuple = ()  # of MsgTerm (output style)
    pre: object = None           # Formula
    post: object = None          # Formula
    havoc: tuple = ()            # attribute names exempt from framing


@dataclass(frozen=True)
class LifecycleDoc:
    name: str
    cls: str = ""
    states: tuple = ()          # of (state name, Formula)
    initial_states: tuple = ()
    transitions: tuple = ()

    def state_formula(self, state: str):
        for s, f in self.states:
            if s == state:
                return f
        raise KeyError(state)

    def transition(self, tname: str) -> TransitionDef:
        for t in self.transitions:
            if t.tname == tname:
                return t
        raise KeyError(tname)

    def validate(self) -> None:
        if not self.states:
            raise DocumentError(f"lifecycle {self.name} has no states")
        names = [s for s, _ in self.states]
        if len(set(names)) != len(names):
            raise DocumentError(f"duplicate state in {self.name}")
        if not self.initial_states:
            raise DocumentError(f"lifecycle {self.name} has no initial state")
        for s in self.initial_states:
            if s not in names:
                raise DocumentError(
                    f"initial state {s!r} undeclared in {self.name}")
        tnames = [t.tname for t in self.transitions]
        if len(set(tnames)) != len(tnames):
            raise DocumentError(f"duplicate transition name in {self.name}")
        for t in self.transitions:
            if t.source not in names or t.target not in names:
                raise DocumentError(
                    f"transition {t.tname!r} endpoint undeclared in {self.name}")


Document = object  # TypeDocument | ObjectModelDoc | ClassDescriptionDoc | LifecycleDoc

KIND_NAMES = {
    TypeDocument: "typedocument",
    ObjectModelDoc: "objectmodeldocument",
    ClassDescriptionDoc: "classdocument",
    LifecycleDoc: "lifecycledocument",
}


def doc_kind(doc) -> str:
    return KIND_NAMES[type(doc)]


def with_name(doc, name: str):
    return replace(doc, name=name)
