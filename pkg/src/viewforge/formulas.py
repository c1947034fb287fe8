"""Term and formula AST of the finite-domain predicate language.

Variables are plain names; the distinguished ones (``in``, ``out``,
``self``) are ordinary :class:`NameTerm` occurrences with reserved names.
A primed occurrence ``a'`` refers to the post-transition value of
attribute ``a`` and is keyed as ``a'`` in bindings.

Connectives ``and``/``or`` are n-ary and kept flat; build them with
:func:`conj` / :func:`disj` so that parse(render(f)) reproduces f
structurally.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import AlreadyPrimed

RESERVED_VARS = ("in", "out", "self")

# Sort keys: a plain sort name, ("set", key) for powerset sorts,
# "@object" for the universal endpoint sort, ("@in", cls) for the input
# message alphabet of a class.
SortKey = object


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NameTerm:
    name: str
    primed: bool = False

    @property
    def key(self) -> str:
        return self.name + "'" if self.primed else self.name


@dataclass(frozen=True)
class IntLit:
    n: int


@dataclass(frozen=True)
class IdLit:
    cls: str
    index: int


@dataclass(frozen=True)
class ValueLit:
    """A wrapped runtime value; used when turning bindings back into terms."""
    value: object


@dataclass(frozen=True)
class SetLit:
    elems: tuple


@dataclass(frozen=True)
class SetOp:
    op: str  # "union" | "diff"
    left: object
    right: object


@dataclass(frozen=True)
class Arith:
    op: str  # "+" | "-"
    left: object
    right: object


@dataclass(frozen=True)
class MsgTerm:
    """Message construction.

    Input style carries a sender term (receiver defaults to ``self``),
    output style a receiver term (sender defaults to ``self``).
    """
    sender: object | None
    receiver: object | None
    name: str
    args: tuple


@dataclass(frozen=True)
class SeqTerm:
    elems: tuple


@dataclass(frozen=True)
class ProjTerm:
    """arg(m, i): i-th argument of a message value."""
    base: object
    index: int


@dataclass(frozen=True)
class SndrTerm:
    """sndr(m): sender endpoint of a message value."""
    base: object


Term = object


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoolLit:
    value: bool


TRUE = BoolLit(True)
FALSE = BoolLit(False)


@dataclass(frozen=True)
class Cmp:
    op: str  # "=" | "/=" | "isin" | "subseteq"
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    body: object


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


@dataclass(frozen=True)
class Implies:
    left: object
    right: object


@dataclass(frozen=True)
class Quant:
    kind: str  # "exists" | "forall"
    binders: tuple  # of (name, SortKey | None)
    body: object


Formula = object


def conj(*parts) -> Formula:
    """Flat n-ary conjunction; absorbs nested Ands and true."""
    flat: list = []
    for p in parts:
        if isinstance(p, And):
            flat.extend(p.parts)
        elif p == TRUE:
            continue
        else:
            flat.append(p)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*parts) -> Formula:
    flat: list = []
    for p in parts:
        if isinstance(p, Or):
            flat.extend(p.parts)
        elif p == FALSE:
            continue
        else:
            flat.append(p)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


# ---------------------------------------------------------------------------
# Free variables
# ---------------------------------------------------------------------------

def term_free_vars(t, bound: frozenset = frozenset()) -> set:
    """Free variable keys of a term (primed names carry a trailing ')."""
    if isinstance(t, NameTerm):
        return set() if t.name in bound and not t.primed else {t.key}
    if isinstance(t, (IntLit, IdLit, ValueLit)):
        return set()
    if isinstance(t, SetLit):
        out: set = set()
        for e in t.elems:
            out |= term_free_vars(e, bound)
        return out
    if isinstance(t, (SetOp, Arith)):
        return term_free_vars(t.left, bound) | term_free_vars(t.right, bound)
    if isinstance(t, MsgTerm):
        out = set()
        if t.sender is not None:
            out |= term_free_vars(t.sender, bound)
        if t.receiver is not None:
            out |= term_free_vars(t.receiver, bound)
        for a in t.args:
            out |= term_free_vars(a, bound)
        # implicit self endpoint
        if t.sender is None or t.receiver is None:
            out |= {"self"} - set(bound)
        return out
    if isinstance(t, SeqTerm):
        out = set()
        for e in t.elems:
            out |= term_free_vars(e, bound)
        return out
    if isinstance(t, ProjTerm):
        return term_free_vars(t.base, bound)
    if isinstance(t, SndrTerm):
        return term_free_vars(t.base, bound)
    raise TypeError(f"not a term: {t!r}")


def free_vars(f, bound: frozenset = frozenset()) -> set:
    """Free variable keys of a formula."""
    if isinstance(f, BoolLit):
        return set()
    if isinstance(f, Cmp):
        return term_free_vars(f.left, bound) | term_free_vars(f.right, bound)
    if isinstance(f, Not):
        return free_vars(f.body, bound)
    if isinstance(f, (And, Or)):
        out: set = set()
        for p in f.parts:
            out |= free_vars(p, bound)
        return out
    if isinstance(f, Implies):
        return free_vars(f.left, bound) | free_vars(f.right, bound)
    if isinstance(f, Quant):
        inner = bound | {name for name, _ in f.binders}
        return free_vars(f.body, inner)
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Priming and substitution
# ---------------------------------------------------------------------------

def prime_formula(f, attrs=None):
    """Replace every free attribute occurrence with its primed variant.

    With ``attrs`` given, only those names are primed (leaving enum
    literals and other constants alone); without it every free name is
    treated as an attribute.  Raises AlreadyPrimed if the formula
    already contains a primed occurrence.
    """
    return _prime(f, frozenset(), None if attrs is None else frozenset(attrs))


def _prime_term(t, bound, attrs=None):
    if isinstance(t, NameTerm):
        if t.primed:
            raise AlreadyPrimed(f"variable {t.name}' is already primed")
        if t.name in bound or t.name in RESERVED_VARS:
            return t
        if attrs is not None and t.name not in attrs:
            return t
        return NameTerm(t.name, primed=True)
    if isinstance(t, (IntLit, IdLit, ValueLit)):
        return t
    if isinstance(t, SetLit):
        return SetLit(tuple(_prime_term(e, bound, attrs) for e in t.elems))
    if isinstance(t, SetOp):
        return SetOp(t.op, _prime_term(t.left, bound, attrs),
                     _prime_term(t.right, bound, attrs))
    if isinstance(t, Arith):
        return Arith(t.op, _prime_term(t.left, bound, attrs),
                     _prime_term(t.right, bound, attrs))
    if isinstance(t, MsgTerm):
        return MsgTerm(
            None if t.sender is None else _prime_term(t.sender, bound, attrs),
            None if t.receiver is None else _prime_term(t.receiver, bound, attrs),
            t.name,
            tuple(_prime_term(a, bound, attrs) for a in t.args),
        )
    if isinstance(t, SeqTerm):
        return SeqTerm(tuple(_prime_term(e, bound, attrs) for e in t.elems))
    if isinstance(t, ProjTerm):
        return ProjTerm(_prime_term(t.base, bound, attrs), t.index)
    if isinstance(t, SndrTerm):
        return SndrTerm(_prime_term(t.base, bound, attrs))
    raise TypeError(f"not a term: {t!r}")


def _prime(f, bound, attrs=None):
    if isinstance(f, BoolLit):
        return f
    if isinstance(f, Cmp):
        return Cmp(f.op, _prime_term(f.left, bound, attrs),
                   _prime_term(f.right, bound, attrs))
    if isinstance(f, Not):
        return Not(_prime(f.body, bound, attrs))
    if isinstance(f, And):
        return And(tuple(_prime(p, bound, attrs) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(_prime(p, bound, attrs) for p in f.parts))
    if isinstance(f, Implies):
        return Implies(_prime(f.left, bound, attrs), _prime(f.right, bound, attrs))
    if isinstance(f, Quant):
        inner = bound | {name for name, _ in f.binders}
        return Quant(f.kind, f.binders, _prime(f.body, inner, attrs))
    raise TypeError(f"not a formula: {f!r}")


def substitute(f, name: str, replacement):
    """Substitute a term for every free occurrence of an unprimed variable."""
    return _subst(f, name, replacement, frozenset())


def _subst_term(t, name, rep, bound):
    if isinstance(t, NameTerm):
        if not t.primed and t.name == name and name not in bound:
            return rep
        return t
    if isinstance(t, (IntLit, IdLit, ValueLit)):
        return t
    if isinstance(t, SetLit):
        return SetLit(tuple(_subst_term(e, name, rep, bound) for e in t.elems))
    if isinstance(t, SetOp):
        return SetOp(t.op, _subst_term(t.left, name, rep, bound),
                     _subst_term(t.right, name, rep, bound))
    if isinstance(t, Arith):
        return Arith(t.op, _subst_term(t.left, name, rep, bound),
                     _subst_term(t.right, name, rep, bound))
    if isinstance(t, MsgTerm):
        return MsgTerm(
            None if t.sender is None else _subst_term(t.sender, name, rep, bound),
            None if t.receiver is None else _subst_term(t.receiver, name, rep, bound),
            t.name,
            tuple(_subst_term(a, name, rep, bound) for a in t.args),
        )
    if isinstance(t, SeqTerm):
        return SeqTerm(tuple(_subst_term(e, name, rep, bound) for e in t.elems))
    if isinstance(t, ProjTerm):
        return ProjTerm(_subst_term(t.base, name, rep, bound), t.index)
    if isinstance(t, SndrTerm):
        return SndrTerm(_subst_term(t.base, name, rep, bound))
    raise TypeError(f"not a term: {t!r}")


def _subst(f, name, rep, bound):
    if isinstance(f, BoolLit):
        return f
    if isinstance(f, Cmp):
        return Cmp(f.op, _subst_term(f.left, name, rep, bound),
                   _subst_term(f.right, name, rep, bound))
    if isinstance(f, Not):
        return Not(_subst(f.body, name, rep, bound))
    if isinstance(f, And):
        return And(tuple(_subst(p, name, rep, bound) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(_subst(p, name, rep, bound) for p in f.parts))
    if isinstance(f, Implies):
        return Implies(_subst(f.left, name, rep, bound),
                       _subst(f.right, name, rep, bound))
    if isinstance(f, Quant):
        if any(n == name for n, _ in f.binders):
            return f
        inner = bound | {n for n, _ in f.binders}
        return Quant(f.kind, f.binders, _subst(f.body, name, rep, inner))
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Rendering (canonical surface syntax)
# ---------------------------------------------------------------------------

def render_sort_key(key) -> str:
    if key is None:
        return "?"
    if isinstance(key, str):
        if key == "@object":
            return "Object"
        return key
    if isinstance(key, tuple) and key[0] == "set":
        return "Set " + render_sort_key(key[1])
    if isinstance(key, tuple) and key[0] == "@in":
        return "In " + key[1]
    raise TypeError(f"not a sort key: {key!r}")


def render_term(t, prec: int = 0) -> str:
    from .values import render_value

    if isinstance(t, NameTerm):
        return t.key
    if isinstance(t, IntLit):
        return str(t.n)
    if isinstance(t, IdLit):
        return f"{t.cls}#{t.index}"
    if isinstance(t, ValueLit):
        return render_value(t.value)
    if isinstance(t, SetLit):
        if not t.elems:
            return "{}"
        return "{ " + " , ".join(render_term(e) for e in t.elems) + " }"
    if isinstance(t, (SetOp, Arith)):
        op = t.op
        s = f"{render_term(t.left, 1)} {op} {render_term(t.right, 2)}"
        return f"( {s} )" if prec >= 2 else s
    if isinstance(t, MsgTerm):
        args = " , ".join(render_term(a) for a in t.args)
        if t.sender is not None:
            return f"{render_term(t.sender, 2)} ? {t.name}({args})"
        return f"{render_term(t.receiver, 2)} ! {t.name}({args})"
    if isinstance(t, SeqTerm):
        return "[ " + " , ".join(render_term(e) for e in t.elems) + " ]" \
            if t.elems else "[ ]"
    if isinstance(t, ProjTerm):
        return f"arg({render_term(t.base)} , {t.index})"
    if isinstance(t, SndrTerm):
        return f"sndr({render_term(t.base)})"
    raise TypeError(f"not a term: {t!r}")


# precedence levels: 0 quantifier, 1 implies, 2 or, 3 and, 4 not, 5 atom
def render_formula(f, prec: int = 0) -> str:
    if isinstance(f, BoolLit):
        return "true" if f.value else "false"
    if isinstance(f, Cmp):
        return f"{render_term(f.left)} {f.op} {render_term(f.right)}"
    if isinstance(f, Not):
        return f"not {render_formula(f.body, 4)}"
    if isinstance(f, And):
        s = " and ".join(render_formula(p, 3) for p in f.parts)
        return f"( {s} )" if prec > 2 else s
    if isinstance(f, Or):
        s = " or ".join(render_formula(p, 2) for p in f.parts)
        return f"( {s} )" if prec > 1 else s
    if isinstance(f, Implies):
        s = f"{render_formula(f.left, 2)} => {render_formula(f.right, 1)}"
        return f"( {s} )" if prec > 0 else s
    if isinstance(f, Quant):
        binders = " , ".join(
            f"{n} : {render_sort_key(k)}" for n, k in f.binders)
        s = f"{f.kind} {binders} . {render_formula(f.body, 0)}"
        return f"( {s} )" if prec > 0 else s
    raise TypeError(f"not a formula: {f!r}")
