"""Recursive-descent parser for view documents, formulas and scenarios.

The parser is context free apart from per-document uniqueness checks;
name/sort resolution is deferred to the checker.  The full grammar ships
in ``docs/grammar.ebnf``.
"""

from __future__ import annotations

from .documents import (
    ClassDescriptionDoc, InputPattern, LifecycleDoc, MethodSig, ObjectModelDoc,
    Relationship, Role, SortDef, TransitionDef, TypeDocument, ONE, MANY,
)
from .errors import ParseError
from .formulas import (
    Arith, BoolLit, Cmp, IdLit, Implies, IntLit, MsgTerm, NameTerm, Not,
    ProjTerm, Quant, SeqTerm, SetLit, SetOp, SndrTerm, conj, disj, FALSE, TRUE,
)
from .lexer import EOF, IDENT, INT, KEYWORD, OBJID, PRIME, Token, lex


class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.type != EOF:
            self.pos += 1
        return tok

    def at(self, ttype: str, value=None) -> bool:
        tok = self.peek()
        if tok.type != ttype:
            return False
        return value is None or tok.value == value

    def at_kw(self, *words: str) -> bool:
        tok = self.peek()
        return tok.type == KEYWORD and tok.value in words

    def accept(self, ttype: str, value=None) -> Token | None:
        if self.at(ttype, value):
            return self.advance()
        return None

    def expect(self, ttype: str, value=None) -> Token:
        tok = self.peek()
        if not self.at(ttype, value):
            want = value if value is not None else ttype
            raise ParseError(
                f"expected {want!r}, got {tok.value!r}", tok.line, tok.col)
        return self.advance()

    def expect_kw(self, word: str) -> Token:
        tok = self.peek()
        if not self.at_kw(word):
            raise ParseError(
                f"expected {word!r}, got {tok.value!r}", tok.line, tok.col)
        return self.advance()

    def fail(self, message: str):
        tok = self.peek()
        raise ParseError(message, tok.line, tok.col)


def _ident(c: _Cursor) -> str:
    tok = c.peek()
    if tok.type != IDENT:
        raise ParseError(f"expected identifier, got {tok.value!r}",
                         tok.line, tok.col)
    return c.advance().value


# ---------------------------------------------------------------------------
# Sort expressions
# ---------------------------------------------------------------------------

def parse_sort_expr(c: _Cursor):
    if c.accept(KEYWORD, "Set"):
        return ("set", parse_sort_expr(c))
    if c.accept(KEYWORD, "Object"):
        return "@object"
    if c.at_kw("In"):
        c.advance()
        return ("@in", _ident(c))
    return _ident(c)


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

_ADDITIVE = {"+": "+", "-": "-"}
_SETOPS = {"union", "diff"}


def parse_term(c: _Cursor):
    left = _parse_postfix_term(c)
    while True:
        tok = c.peek()
        if tok.type in _ADDITIVE:
            c.advance()
            right = _parse_postfix_term(c)
            left = Arith(tok.type, left, right)
        elif tok.type == KEYWORD and tok.value in _SETOPS:
            c.advance()
            right = _parse_postfix_term(c)
            left = SetOp(tok.value, left, right)
        else:
            return left


def _parse_msg_args(c: _Cursor) -> tuple:
    c.expect("(")
    args: list = []
    if not c.at(")"):
        args.append(parse_term(c))
        while c.accept(","):
            args.append(parse_term(c))
    c.expect(")")
    return tuple(args)


def _parse_postfix_term(c: _Cursor):
    base = _parse_atom_term(c)
    if c.accept("!"):
        name = _ident(c)
        return MsgTerm(None, base, name, _parse_msg_args(c))
    if c.accept("?"):
        name = _ident(c)
        return MsgTerm(base, None, name, _parse_msg_args(c))
    return base


def _parse_atom_term(c: _Cursor):
    tok = c.peek()
    if tok.type == IDENT:
        c.advance()
        primed = c.accept(PRIME) is not None
        return NameTerm(tok.value, primed)
    if tok.type == OBJID:
        c.advance()
        cls, index = tok.value
        return IdLit(cls, index)
    if tok.type == INT:
        c.advance()
        return IntLit(tok.value)
    if tok.type == KEYWORD and tok.value in ("in", "out", "self"):
        c.advance()
        return NameTerm(tok.value)
    if c.accept("{"):
        elems: list = []
        if not c.at("}"):
            elems.append(parse_term(c))
            while c.accept(","):
                elems.append(parse_term(c))
        c.expect("}")
        return SetLit(tuple(elems))
    if c.accept("["):
        elems = []
        if not c.at("]"):
            elems.append(parse_term(c))
            while c.accept(","):
                elems.append(parse_term(c))
        c.expect("]")
        return SeqTerm(tuple(elems))
    if c.at_kw("arg"):
        c.advance()
        c.expect("(")
        base = parse_term(c)
        c.expect(",")
        idx = c.expect(INT).value
        c.expect(")")
        return ProjTerm(base, idx)
    if c.at_kw("sndr"):
        c.advance()
        c.expect("(")
        base = parse_term(c)
        c.expect(")")
        return SndrTerm(base)
    if c.accept("("):
        inner = parse_term(c)
        c.expect(")")
        return inner
    c.fail(f"expected a term, got {tok.value!r}")


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

_CMP_OPS = ("=", "/=")
_CMP_KWS = ("isin", "subseteq")


def parse_formula(c: _Cursor):
    left = _parse_or(c)
    if c.accept("=>"):
        right = parse_formula(c)
        return Implies(left, right)
    return left


def _parse_or(c: _Cursor):
    parts = [_parse_and(c)]
    while c.accept(KEYWORD, "or"):
        parts.append(_parse_and(c))
    return disj(*parts) if len(parts) > 1 else parts[0]


def _parse_and(c: _Cursor):
    parts = [_parse_unary(c)]
    while c.accept(KEYWORD, "and"):
        parts.append(_parse_unary(c))
    return conj(*parts) if len(parts) > 1 else parts[0]


def _parse_unary(c: _Cursor):
    if c.accept(KEYWORD, "not"):
        return Not(_parse_unary(c))
    if c.at_kw("exists", "forall"):
        kind = c.advance().value
        binders = [_parse_binder(c)]
        while c.accept(","):
            binders.append(_parse_binder(c))
        c.expect(".")
        body = parse_formula(c)
        return Quant(kind, tuple(binders), body)
    return _parse_atom_formula(c)


def _parse_binder(c: _Cursor) -> tuple:
    name = _ident(c)
    c.expect(":")
    return (name, parse_sort_expr(c))


def _parse_atom_formula(c: _Cursor):
    if c.accept(KEYWORD, "true"):
        return TRUE
    if c.accept(KEYWORD, "false"):
        return FALSE
    if c.at("("):
        # ambiguous: parenthesized formula or parenthesized term in a
        # comparison; try the term route first and rewind on failure
        saved = c.pos
        try:
            return _parse_comparison(c)
        except ParseError:
            c.pos = saved
        c.expect("(")
        inner = parse_formula(c)
        c.expect(")")
        return inner
    return _parse_comparison(c)


def _parse_comparison(c: _Cursor):
    left = parse_term(c)
    tok = c.peek()
    if tok.type in _CMP_OPS:
        c.advance()
        return Cmp(tok.type, left, parse_term(c))
    if tok.type == KEYWORD and tok.value in _CMP_KWS:
        c.advance()
        return Cmp(tok.value, left, parse_term(c))
    c.fail(f"expected comparison operator, got {tok.value!r}")


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------

def parse_document(text: str):
    """Parse one view document of any kind from source text."""
    c = _Cursor(lex(text))
    doc = _parse_document(c)
    c.expect(EOF)
    return doc


def _parse_document(c: _Cursor):
    tok = c.peek()
    if c.at_kw("typedocument"):
        return _parse_type_document(c)
    if c.at_kw("objectmodeldocument"):
        return _parse_object_model(c)
    if c.at_kw("classdocument"):
        return _parse_class_document(c)
    if c.at_kw("lifecycledocument"):
        return _parse_lifecycle(c)
    raise ParseError(
        f"expected a document keyword, got {tok.value!r}", tok.line, tok.col)


def _parse_type_document(c: _Cursor) -> TypeDocument:
    c.expect_kw("typedocument")
    name = _ident(c)
    c.expect(":")
    sorts: list[SortDef] = []
    while c.at_kw("sort"):
        c.advance()
        sname = _ident(c)
        c.expect("=")
        if c.at("{"):
            c.advance()
            lits = [_ident(c)]
            while c.accept(","):
                lits.append(_ident(c))
            c.expect("}")
            sorts.append(SortDef(sname, literals=tuple(lits)))
        elif c.at(INT):
            lo = c.advance().value
            c.expect("..")
            hi = c.expect(INT).value
            sorts.append(SortDef(sname, int_range=(lo, hi)))
        elif c.at_kw("Set"):
            sorts.append(SortDef(sname, set_of=parse_sort_expr(c)))
        else:
            c.fail("expected enumeration, integer range or Set sort")
        c.expect(";")
    c.expect_kw("endtypedocument")
    # member order is set-semantic: normalize at parse time (literal order
    # inside an enumeration stays as written; it fixes the carrier)
    doc = TypeDocument(name, tuple(sorted(sorts, key=lambda s: s.name)))
    doc.validate()
    return doc


def _parse_role(c: _Cursor) -> Role:
    cls = _ident(c)
    rolename = _ident(c) if c.at(IDENT) else None
    c.expect("[")
    if c.accept("*"):
        card = MANY
    else:
        tok = c.expect(INT)
        if tok.value != 1:
            raise ParseError("cardinality must be 1 or *", tok.line, tok.col)
        card = ONE
    c.expect("]")
    return Role(cls, rolename, card)


def _parse_object_model(c: _Cursor) -> ObjectModelDoc:
    c.expect_kw("objectmodeldocument")
    name = _ident(c)
    c.expect(":")
    c.expect_kw("classes")
    classes = [_ident(c)]
    c.expect(";")
    while c.at(IDENT):
        classes.append(_ident(c))
        c.expect(";")
    rels: list[Relationship] = []
    while c.at_kw("relationship"):
        c.advance()
        a = _parse_role(c)
        c.expect("--")
        b = _parse_role(c)
        c.expect(";")
        rels.append(Relationship.of(a, b))
    c.expect_kw("endobjectmodeldocument")
    doc = ObjectModelDoc(
        name, tuple(sorted(classes)),
        tuple(sorted(rels, key=lambda r: (r.first.key(), r.second.key()))))
    doc.validate()
    return doc


def _parse_method_sig(c: _Cursor) -> MethodSig:
    name = _ident(c)
    c.expect("(")
    params: list = []
    if not c.at(")"):
        pname = _ident(c)
        c.expect(":")
        params.append((pname, parse_sort_expr(c)))
        while c.accept(","):
            pname = _ident(c)
            c.expect(":")
            params.append((pname, parse_sort_expr(c)))
    c.expect(")")
    return MethodSig(name, tuple(params))


def _parse_class_document(c: _Cursor) -> ClassDescriptionDoc:
    c.expect_kw("classdocument")
    name = _ident(c)
    c.expect(":")
    c.expect_kw("class")
    cls = _ident(c)
    c.expect(";")
    attrs: list = []
    methods: list[MethodSig] = []
    if c.accept(KEYWORD, "attributes"):
        while c.at(IDENT):
            aname = _ident(c)
            c.expect(":")
            attrs.append((aname, parse_sort_expr(c)))
            c.expect(";")
    if c.accept(KEYWORD, "methods"):
        while c.at(IDENT):
            methods.append(_parse_method_sig(c))
            c.expect(";")
    c.expect_kw("endclassdocument")
    doc = ClassDescriptionDoc(
        name, cls, tuple(sorted(attrs)),
        tuple(sorted(methods, key=lambda m: (m.name, m.arity))))
    doc.validate()
    return doc


def parse_transition(c: _Cursor) -> TransitionDef:
    c.expect_kw("transition")
    tname = _ident(c)
    c.expect(":")
    source = _ident(c)
    c.expect("->")
    target = _ident(c)
    input_pattern = None
    if c.accept(KEYWORD, "input"):
        sender_var = _ident(c)
        c.expect("?")
        method = _ident(c)
        c.expect("(")
        pvars: list[str] = []
        if not c.at(")"):
            pvars.append(_ident(c))
            while c.accept(","):
                pvars.append(_ident(c))
        c.expect(")")
        c.expect(";")
        input_pattern = InputPattern(sender_var, method, tuple(pvars))
    pre = TRUE
    if c.accept(KEYWORD, "pre"):
        pre = parse_formula(c)
        c.expect(";")
    outputs: list[MsgTerm] = []
    if c.accept(KEYWORD, "output"):
        outputs.append(_parse_output_pattern(c))
        while c.accept(","):
            outputs.append(_parse_output_pattern(c))
        c.expect(";")
    post = TRUE
    if c.accept(KEYWORD, "post"):
        post = parse_formula(c)
        c.expect(";")
    havoc: list[str] = []
    if c.accept(KEYWORD, "havoc"):
        havoc.append(_ident(c))
        while c.accept(","):
            havoc.append(_ident(c))
        c.expect(";")
    c.expect_kw("endtransition")
    return TransitionDef(tname, source, target, input_pattern,
                         tuple(outputs), pre, post, tuple(sorted(havoc)))


def _parse_output_pattern(c: _Cursor) -> MsgTerm:
    term = _parse_postfix_term(c)
    if not isinstance(term, MsgTerm) or term.receiver is None:
        c.fail("output pattern must be receiver ! name(args)")
    return term


def _parse_lifecycle(c: _Cursor) -> LifecycleDoc:
    c.expect_kw("lifecycledocument")
    name = _ident(c)
    c.expect(":")
    c.expect_kw("class")
    cls = _ident(c)
    c.expect(";")
    states: list = []
    while c.at_kw("state"):
        c.advance()
        sname = _ident(c)
        c.expect(":")
        formula = parse_formula(c)
        c.expect(";")
        states.append((sname, formula))
    c.expect_kw("initial")
    initials = [_ident(c)]
    while c.accept(","):
        initials.append(_ident(c))
    c.expect(";")
    transitions: list[TransitionDef] = []
    while c.at_kw("transition"):
        transitions.append(parse_transition(c))
    c.expect_kw("endlifecycledocument")
    doc = LifecycleDoc(
        name, cls, tuple(sorted(states)), tuple(sorted(initials)),
        tuple(sorted(transitions, key=lambda t: t.tname)))
    doc.validate()
    return doc


# ---------------------------------------------------------------------------
# Scenarios (raw AST; value terms are resolved against a project by sim)
# ---------------------------------------------------------------------------

def parse_scenario_text(text: str) -> dict:
    """Parse a scenario file into a raw dict; see docs/formats.md.

    Keys: name, horizon, seed, max_delay, drop_on_stall,
    objects [(cls, index, state, [(attr, term)])], stimuli
    [(tick, cls, index, method, [terms])].
    """
    c = _Cursor(lex(text))
    c.expect_kw("scenario")
    name = _ident(c)
    c.expect(":")
    raw = {"name": name, "horizon": None, "seed": 0, "max_delay": 1,
           "drop_on_stall": False, "objects": [], "stimuli": []}
    while not c.at_kw("endscenario"):
        if c.accept(KEYWORD, "horizon"):
            raw["horizon"] = c.expect(INT).value
            c.expect(";")
        elif c.accept(KEYWORD, "seed"):
            raw["seed"] = c.expect(INT).value
            c.expect(";")
        elif c.accept(KEYWORD, "max_delay"):
            raw["max_delay"] = c.expect(INT).value
            c.expect(";")
        elif c.accept(KEYWORD, "drop_on_stall"):
            raw["drop_on_stall"] = True
            c.expect(";")
        elif c.accept(KEYWORD, "object"):
            cls, index = c.expect(OBJID).value
            c.expect_kw("state")
            state = _ident(c)
            c.expect_kw("with")
            assigns: list = []
            if not c.at(";"):
                assigns.append(_parse_assign(c))
                while c.accept(","):
                    assigns.append(_parse_assign(c))
            c.expect(";")
            raw["objects"].append((cls, index, state, assigns))
        elif c.accept(KEYWORD, "stimulus"):
            tick = c.expect(INT).value
            cls, index = c.expect(OBJID).value
            c.expect("!")
            method = _ident(c)
            args = _parse_msg_args(c)
            c.expect(";")
            raw["stimuli"].append((tick, cls, index, method, list(args)))
        else:
            c.fail("expected a scenario clause")
    c.expect_kw("endscenario")
    c.expect(EOF)
    return raw


def _parse_assign(c: _Cursor) -> tuple:
    name = _ident(c)
    c.expect("=")
    return (name, parse_term(c))


# ---------------------------------------------------------------------------
# Standalone helpers
# ---------------------------------------------------------------------------

def parse_formula_text(text: str):
    c = _Cursor(lex(text))
    f = parse_formula(c)
    c.expect(EOF)
    return f


def parse_term_text(text: str):
    c = _Cursor(lex(text))
    t = parse_term(c)
    c.expect(EOF)
    return t


def parse_transition_text(text: str) -> TransitionDef:
    c = _Cursor(lex(text))
    t = parse_transition(c)
    c.expect(EOF)
    return t
