"""The document refinement calculus.

Twelve syntactic step kinds transform documents; automaton steps emit
proof obligations that are discharged by bounded enumeration (the
concrete obligation formulas are reconstructions from the rule glosses
and are tagged RECONSTRUCTED in reports).  ``oracle_refines`` is the
independent semantic check: exhaustive bounded trace inclusion of the
new automaton in the chaotic completion of the old one.

Script files are line oriented, one step per line::

    refrel pick-up_branch addrole pick-up_rentals
    addattr Branch branches : Catalogue
    addmeth Branch pick-up(end : Date , t : Town)
    addtrans Branch transition return : Idle -> Idle input ... endtransition
    rename InitBranch Pick-UpBranch
    expect Pick-UpBranch ../pickup/Pick-UpBranch.vclass

``rename`` and ``expect`` are replay plumbing, not calculus steps: a
document's name carries no semantics.  Class-description and lifecycle
steps may address the target by document name or by class name.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .documents import (
    ClassDescriptionDoc, LifecycleDoc, MethodSig, ObjectModelDoc,
    Relationship, Role, TransitionDef, ONE, MANY,
)
from .errors import (
    BudgetExceeded, IllegalPayload, NameClash, ParseError, StepError,
    TargetMissing, ViewforgeError,
)
from .formulas import And, Implies, Not, Quant, conj, disj
from .lexer import EOF, IDENT, INT, KEYWORD, lex
from .checker import (
    BUDGET, FAIL, PASS, ConditionReport, _attr_binders, _fill,
)
from .logic import Budget, enumerate_models, exists_plan
from .parser import _Cursor, _ident, parse_formula, parse_sort_expr, \
    parse_transition, _parse_method_sig, _parse_role
from .project import DocumentSet
from .render import render_document
from .system_model import (
    SignatureEnv, TransitionExec, lifecycle_exec,
)
from .values import MsgValue, value_key


# ---------------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    """One calculus step; ``kind`` selects the payload fields in use."""
    kind: str
    target: str | None = None      # document or class name; None = the object model
    cls: str | None = None         # addclass
    roles: tuple | None = None     # addrel: (Role, Role)
    rolename: str | None = None    # refrel selector
    action: tuple | None = None    # refrel: ("addrole", rn) | ("card", "1")
    method: MethodSig | None = None
    attr: tuple | None = None      # (name, sort expr)
    state: str | None = None       # addstate/remstate/reminit/split
    formula: object | None = None  # addstate
    split_into: tuple | None = None  # ((s1, f1), (s2, f2))
    transition: TransitionDef | None = None  # addtrans/reftrans
    tname: str | None = None       # remtrans/reftrans


@dataclass(frozen=True)
class Obligation:
    name: str
    formula: object
    locus: str


@dataclass(frozen=True)
class Rename:
    old: str
    new: str


@dataclass(frozen=True)
class Expect:
    doc_name: str
    golden_path: str


@dataclass
class RefinementScript:
    entries: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Target resolution
# ---------------------------------------------------------------------------

def _resolve_object_model(ds: DocumentSet) -> ObjectModelDoc:
    om = ds.object_model()
    if om is None:
        raise TargetMissing("project has no object model document")
    return om


def _resolve_class_doc(ds: DocumentSet, target: str) -> ClassDescriptionDoc:
    doc = ds.get(target)
    if isinstance(doc, ClassDescriptionDoc):
        return doc
    if doc is not None:
        raise TargetMissing(f"{target!r} is not a class description")
    hits = [d for d in ds.class_documents() if d.cls == target]
    if len(hits) == 1:
        return hits[0]
    raise TargetMissing(
        f"no unique class description for target {target!r}")


def _resolve_lifecycle(ds: DocumentSet, target: str) -> LifecycleDoc:
    doc = ds.get(target)
    if isinstance(doc, LifecycleDoc):
        return doc
    if doc is not None:
        raise TargetMissing(f"{target!r} is not a lifecycle document")
    lc = ds.lifecycle_for(target)
    if lc is not None:
        return lc
    raise TargetMissing(f"no lifecycle for target {target!r}")


# ---------------------------------------------------------------------------
# apply_step
# ---------------------------------------------------------------------------

def apply_step(ds: DocumentSet, step: Step):
    """Apply one syntactic step; returns (new DocumentSet, obligations).

    Application is atomic: any structural error raises StepError and the
    input DocumentSet is unchanged (it is never mutated).
    """
    before = ds
    handler = _HANDLERS.get(step.kind)
    if handler is None:
        raise IllegalPayload(f"unknown step kind {step.kind!r}")
    ds2 = handler(ds, step)
    obligations = generate_obligations(step, before, ds2)
    return ds2, obligations


def _apply_addclass(ds: DocumentSet, step: Step) -> DocumentSet:
    om = _resolve_object_model(ds)
    if step.cls in om.classes:
        raise NameClash(f"class {step.cls!r} already declared")
    doc = replace(om, classes=tuple(sorted(om.classes + (step.cls,))))
    doc.validate()
    return ds.replace_doc(om.name, doc)


def _apply_addrel(ds: DocumentSet, step: Step) -> DocumentSet:
    om = _resolve_object_model(ds)
    rel = Relationship.of(*step.roles)
    doc = replace(om, relationships=tuple(sorted(
        om.relationships + (rel,),
        key=lambda r: (r.first.key(), r.second.key()))))
    try:
        doc.validate()
    except ViewforgeError as e:
        raise IllegalPayload(str(e)) from None
    return ds.replace_doc(om.name, doc)


def _apply_refrel(ds: DocumentSet, step: Step) -> DocumentSet:
    om = _resolve_object_model(ds)
    hits = []
    for rel in om.relationships:
        for role, other in (rel.roles(), rel.roles()[::-1]):
            if role.rolename == step.rolename:
                hits.append((rel, role, other))
    if len(hits) != 1:
        raise TargetMissing(
            f"rolename {step.rolename!r} does not identify a unique "
            f"relationship")
    rel, role, other = hits[0]
    what, payload = step.action
    if what == "addrole":
        if other.rolename is not None:
            raise NameClash(
                f"both ends of the {step.rolename!r} relationship are "
                f"already named")
        new_other = Role(other.cls, payload, other.card)
        new_rel = Relationship.of(role, new_other)
    elif what == "card":
        if payload != ONE:
            raise IllegalPayload("refrel may only restrict a cardinality to 1")
        if role.card == ONE:
            raise IllegalPayload(
                f"role {step.rolename!r} already has cardinality 1")
        new_rel = Relationship.of(Role(role.cls, role.rolename, ONE), other)
    else:
        raise IllegalPayload(f"unknown refrel action {what!r}")
    rels = tuple(r for r in om.relationships if r != rel) + (new_rel,)
    doc = replace(om, relationships=tuple(sorted(
        rels, key=lambda r: (r.first.key(), r.second.key()))))
    try:
        doc.validate()
    except ViewforgeError as e:
        raise IllegalPayload(str(e)) from None
    return ds.replace_doc(om.name, doc)


def _apply_addmeth(ds: DocumentSet, step: Step) -> DocumentSet:
    cd = _resolve_class_doc(ds, step.target)
    m = step.method
    if any(x.name == m.name and x.arity == m.arity for x in cd.methods):
        raise NameClash(f"method {m.name}/{m.arity} already declared")
    doc = replace(cd, methods=tuple(sorted(
        cd.methods + (m,), key=lambda x: (x.name, x.arity))))
    doc.validate()
    return ds.replace_doc(cd.name, doc)


def _apply_addattr(ds: DocumentSet, step: Step) -> DocumentSet:
    cd = _resolve_class_doc(ds, step.target)
    name, sort = step.attr
    if any(a == name for a, _ in cd.attributes):
        raise NameClash(f"attribute {name!r} already declared")
    om = ds.object_model()
    if om is not None:
        for rel in om.relationships:
            for mine, other in (rel.roles(), rel.roles()[::-1]):
                if mine.cls == cd.cls and other.rolename == name:
                    induced = other.cls if other.card == ONE \
                        else ("set", other.cls)
                    if induced != sort:
                        raise NameClash(
                            f"attribute {name!r} collides with the induced "
                            f"relationship attribute of a different sort")
    doc = replace(cd, attributes=tuple(sorted(cd.attributes + ((name, sort),))))
    doc.validate()
    return ds.replace_doc(cd.name, doc)


def _apply_addstate(ds: DocumentSet, step: Step) -> DocumentSet:
    lc = _resolve_lifecycle(ds, step.target)
    if any(s == step.state for s, _ in lc.states):
        raise NameClash(f"state {step.state!r} already declared")
    doc = replace(lc, states=tuple(sorted(
        lc.states + ((step.state, step.formula),))))
    doc.validate()
    return ds.replace_doc(lc.name, doc)


def _reachable_states(lc: LifecycleDoc) -> set:
    reach = set(lc.initial_states)
    changed = True
    while changed:
        changed = False
        for t in lc.transitions:
            if t.source in reach and t.target not in reach:
                reach.add(t.target)
                changed = True
    return reach


def _apply_remstate(ds: DocumentSet, step: Step) -> DocumentSet:
    lc = _resolve_lifecycle(ds, step.target)
    if not any(s == step.state for s, _ in lc.states):
        raise TargetMissing(f"no state {step.state!r}")
    if step.state in lc.initial_states:
        raise IllegalPayload(f"state {step.state!r} is initial")
    states = tuple(x for x in lc.states if x[0] != step.state)
    transitions = tuple(t for t in lc.transitions
                        if t.source != step.state and t.target != step.state)
    doc = replace(lc, states=states, transitions=transitions)
    doc.validate()
    return ds.replace_doc(lc.name, doc)


def _apply_split(ds: DocumentSet, step: Step) -> DocumentSet:
    lc = _resolve_lifecycle(ds, step.target)
    if not any(s == step.state for s, _ in lc.states):
        raise TargetMissing(f"no state {step.state!r}")
    (s1, f1), (s2, f2) = step.split_into
    existing = {s for s, _ in lc.states}
    if s1 == s2 or s1 in existing - {step.state} or s2 in existing - {step.state}:
        raise NameClash("split state names must be fresh and distinct")
    states = tuple(sorted(
        tuple(x for x in lc.states if x[0] != step.state)
        + ((s1, f1), (s2, f2))))
    initials = tuple(sorted(
        set(lc.initial_states) - {step.state}
        | ({s1, s2} if step.state in lc.initial_states else set())))
    transitions: list = []
    for t in lc.transitions:
        sources = (s1, s2) if t.source == step.state else (t.source,)
        targets = (s1, s2) if t.target == step.state else (t.target,)
        if len(sources) == 1 and len(targets) == 1:
            transitions.append(t)
            continue
        for src in sources:
            for tgt in targets:
                suffix = "".join(
                    "_" + x for x, changed in ((src, t.source == step.state),
                                               (tgt, t.target == step.state))
                    if changed)
                name = t.tname + suffix
                if any(x.tname == name for x in transitions) or \
                        any(x.tname == name for x in lc.transitions):
                    raise NameClash(f"split transition name {name!r} clashes")
                transitions.append(replace(t, tname=name, source=src,
                                           target=tgt))
    doc = replace(lc, states=states, initial_states=initials,
                  transitions=tuple(sorted(transitions, key=lambda t: t.tname)))
    doc.validate()
    return ds.replace_doc(lc.name, doc)


def _apply_addtrans(ds: DocumentSet, step: Step) -> DocumentSet:
    lc = _resolve_lifecycle(ds, step.target)
    t = step.transition
    if any(x.tname == t.tname for x in lc.transitions):
        raise NameClash(f"transition {t.tname!r} already declared")
    doc = replace(lc, transitions=tuple(sorted(
        lc.transitions + (t,), key=lambda x: x.tname)))
    try:
        doc.validate()
    except ViewforgeError as e:
        raise IllegalPayload(str(e)) from None
    return ds.replace_doc(lc.name, doc)


def _apply_remtrans(ds: DocumentSet, step: Step) -> DocumentSet:
    lc = _resolve_lifecycle(ds, step.target)
    if not any(x.tname == step.tname for x in lc.transitions):
        raise TargetMissing(f"no transition {step.tname!r}")
    doc = replace(lc, transitions=tuple(
        x for x in lc.transitions if x.tname != step.tname))
    doc.validate()
    return ds.replace_doc(lc.name, doc)


def _apply_reftrans(ds: DocumentSet, step: Step) -> DocumentSet:
    lc = _resolve_lifecycle(ds, step.target)
    t2 = step.transition
    old = next((x for x in lc.transitions if x.tname == t2.tname), None)
    if old is None:
        raise TargetMissing(f"no transition {t2.tname!r}")
    if (old.source, old.target) != (t2.source, t2.target):
        raise IllegalPayload("reftrans keeps source and target states")
    if old.input_pattern != t2.input_pattern \
            or old.output_patterns != t2.output_patterns \
            or old.havoc != t2.havoc:
        raise IllegalPayload(
            "reftrans refines pre/post only; patterns and havoc are fixed")
    doc = replace(lc, transitions=tuple(sorted(
        tuple(x for x in lc.transitions if x.tname != t2.tname) + (t2,),
        key=lambda x: x.tname)))
    doc.validate()
    return ds.replace_doc(lc.name, doc)


def _apply_reminit(ds: DocumentSet, step: Step) -> DocumentSet:
    lc = _resolve_lifecycle(ds, step.target)
    if step.state not in lc.initial_states:
        raise TargetMissing(f"{step.state!r} is not an initial state")
    initials = tuple(s for s in lc.initial_states if s != step.state)
    if not initials:
        raise IllegalPayload("at least one initial state must remain")
    doc = replace(lc, initial_states=initials)
    doc.validate()
    return ds.replace_doc(lc.name, doc)


_HANDLERS = {
    "addclass": _apply_addclass,
    "addrel": _apply_addrel,
    "refrel": _apply_refrel,
    "addmeth": _apply_addmeth,
    "addattr": _apply_addattr,
    "addstate": _apply_addstate,
    "remstate": _apply_remstate,
    "split": _apply_split,
    "addtrans": _apply_addtrans,
    "remtrans": _apply_remtrans,
    "reftrans": _apply_reftrans,
    "reminit": _apply_reminit,
}


# ---------------------------------------------------------------------------
# Obligations
# ---------------------------------------------------------------------------

def _condition3_formula(lc: LifecycleDoc, tx: TransitionExec, env, cls):
    binders = (("self", cls),) + _attr_binders(cls, env) \
        + (("in", ("@in", cls)),)
    return Quant("forall", binders,
                 Implies(conj(tx.pre, lc.state_formula(tx.transition.source)),
                         tx.step_formula()))


def _domain_formula(lc: LifecycleDoc, tx: TransitionExec):
    return conj(lc.state_formula(tx.transition.source), tx.pre)


def generate_obligations(step: Step, before: DocumentSet,
                         after: DocumentSet) -> list:
    """Proof obligations licensing one applied step.

    Object-model and class-description steps generate none; automaton
    steps generate satisfiability/disjointness/enabledness/coverage
    obligations reconstructed from the rule glosses.
    """
    if step.kind in ("addclass", "addrel", "refrel", "addmeth", "addattr"):
        return []
    env = after.signature_env()
    u = after.universe()
    obs: list = []

    if step.kind == "addstate":
        lc_after = _resolve_lifecycle(after, step.target)
        cls = lc_after.cls
        binders = _attr_binders(cls, env)
        obs.append(Obligation(
            f"addstate:satisfiable:{step.state}",
            Quant("exists", binders, step.formula),
            f"{lc_after.name}/state {step.state}"))
        for sname, sformula in lc_after.states:
            if sname == step.state:
                continue
            obs.append(Obligation(
                f"addstate:disjoint:{step.state}|{sname}",
                Quant("forall", binders,
                      Not(conj(step.formula, sformula))),
                f"{lc_after.name}/states {step.state},{sname}"))
        return obs

    if step.kind == "split":
        lc_before = _resolve_lifecycle(before, step.target)
        lc_after = _resolve_lifecycle(after, step.target)
        cls = lc_after.cls
        binders = _attr_binders(cls, env)
        (s1, f1), (s2, f2) = step.split_into
        old_formula = lc_before.state_formula(step.state)
        both = disj(f1, f2)
        obs.append(Obligation(
            f"split:coverage:{step.state}",
            Quant("forall", binders,
                  conj(Implies(both, old_formula),
                       Implies(old_formula, both))),
            f"{lc_after.name}/state {step.state}"))
        obs.append(Obligation(
            f"split:disjoint:{s1}|{s2}",
            Quant("forall", binders, Not(conj(f1, f2))),
            f"{lc_after.name}/states {s1},{s2}"))
        ex = lifecycle_exec(lc_after, env, u)
        before_names = {t.tname for t in lc_before.transitions}
        for tx in ex.transitions:
            if tx.transition.tname not in before_names:
                obs.append(Obligation(
                    f"split:enabled:{tx.transition.tname}",
                    _condition3_formula(lc_after, tx, env, cls),
                    f"{lc_after.name}/transition {tx.transition.tname}"))
        return obs

    if step.kind == "addtrans":
        lc_before = _resolve_lifecycle(before, step.target)
        lc_after = _resolve_lifecycle(after, step.target)
        cls = lc_after.cls
        ex = lifecycle_exec(lc_after, env, u)
        new_tx = next(tx for tx in ex.transitions
                      if tx.transition.tname == step.transition.tname)
        obs.append(Obligation(
            f"addtrans:enabled:{step.transition.tname}",
            _condition3_formula(lc_after, new_tx, env, cls),
            f"{lc_after.name}/transition {step.transition.tname}"))
        binders = (("self", cls),) + _attr_binders(cls, env) \
            + (("in", ("@in", cls)),)
        for tx in ex.transitions:
            if tx.transition.tname == step.transition.tname:
                continue
            obs.append(Obligation(
                f"addtrans:domain-disjoint:{step.transition.tname}"
                f"|{tx.transition.tname}",
                Quant("forall", binders,
                      Not(conj(_domain_formula(lc_after, new_tx),
                               _domain_formula(lc_after, tx)))),
                f"{lc_after.name}/transitions {step.transition.tname},"
                f"{tx.transition.tname}"))
        return obs

    if step.kind == "remtrans":
        lc_before = _resolve_lifecycle(before, step.target)
        lc_after = _resolve_lifecycle(after, step.target)
        cls = lc_after.cls
        ex_before = lifecycle_exec(lc_before, env, u)
        removed = next(tx for tx in ex_before.transitions
                       if tx.transition.tname == step.tname)
        ex_after = lifecycle_exec(lc_after, env, u)
        binders = (("self", cls),) + _attr_binders(cls, env) \
            + (("in", ("@in", cls)),)
        survivors = disj(*[
            _domain_formula(lc_after, tx) for tx in ex_after.transitions])
        obs.append(Obligation(
            f"remtrans:coverage:{step.tname}",
            Quant("forall", binders,
                  Implies(_domain_formula(lc_before, removed), survivors)),
            f"{lc_before.name}/transition {step.tname}"))
        return obs

    if step.kind == "reftrans":
        lc_before = _resolve_lifecycle(before, step.target)
        lc_after = _resolve_lifecycle(after, step.target)
        cls = lc_after.cls
        old_t = lc_before.transition(step.tname)
        new_t = lc_after.transition(step.tname)
        ex_old = TransitionExec(lc_before, old_t, env, u)
        ex_new = TransitionExec(lc_after, new_t, env, u)
        binders = (("self", cls),) + _attr_binders(cls, env) \
            + (("in", ("@in", cls)),)
        obs.append(Obligation(
            f"reftrans:pre-equivalent:{step.tname}",
            Quant("forall", binders,
                  Implies(lc_before.state_formula(old_t.source),
                          conj(Implies(ex_old.pre, ex_new.pre),
                               Implies(ex_new.pre, ex_old.pre)))),
            f"{lc_after.name}/transition {step.tname}"))
        var_binders = tuple(sorted(
            (k, v) for k, v in ex_new.var_sorts.items()))
        attrs = env.attrs(cls)
        primed = tuple((a + "'", s) for a, s in sorted(attrs.items()))
        obs.append(Obligation(
            f"reftrans:post-strengthens:{step.tname}",
            Quant("forall",
                  (("self", cls),) + _attr_binders(cls, env) + var_binders
                  + primed,
                  Implies(new_t.post, old_t.post)),
            f"{lc_after.name}/transition {step.tname}"))
        obs.append(Obligation(
            f"reftrans:enabled:{step.tname}",
            _condition3_formula(
                lc_after,
                next(tx for tx in lifecycle_exec(lc_after, env, u).transitions
                     if tx.transition.tname == step.tname),
                env, cls),
            f"{lc_after.name}/transition {step.tname}"))
        return obs

    if step.kind == "remstate":
        lc_before = _resolve_lifecycle(before, step.target)
        reach = _reachable_states(lc_before)
        from .formulas import TRUE, FALSE
        unreachable = step.state not in reach
        obs.append(Obligation(
            f"remstate:unreachable:{step.state}",
            TRUE if unreachable else FALSE,
            f"{lc_before.name}/state {step.state}"))
        targeting = [t.tname for t in lc_before.transitions
                     if t.target == step.state and t.source in reach
                     and t.source != step.state]
        obs.append(Obligation(
            f"remstate:untargeted:{step.state}",
            TRUE if not targeting else FALSE,
            f"{lc_before.name}/state {step.state}"
            + (f" targeted by {targeting}" if targeting else "")))
        return obs

    if step.kind == "reminit":
        from .formulas import TRUE
        lc_after = _resolve_lifecycle(after, step.target)
        obs.append(Obligation(
            f"reminit:nonempty:{step.state}",
            TRUE,  # apply_step rejects emptying the initial set
            f"{lc_after.name}/initial {step.state}"))
        return obs

    raise IllegalPayload(f"unknown step kind {step.kind!r}")


def discharge(obligations, u, budget_cap: int | None = None,
              env: SignatureEnv | None = None) -> ConditionReport:
    """Discharge obligations by bounded enumeration.

    Each obligation becomes one PASS/FAIL/BUDGET record; FAIL carries a
    counterexample binding, existential PASS a witness.  All records are
    tagged RECONSTRUCTED: the calculus obligations are this tool's
    reconstruction, not the original rule system's.
    """
    report = ConditionReport()
    for ob in obligations:
        check_id = f"obligation:{ob.name}"
        budget = Budget(budget_cap) if budget_cap else Budget()
        try:
            verdict, binding = _discharge_one(ob.formula, u, budget)
        except BudgetExceeded:
            report.add(check_id, BUDGET, ob.locus, None, "RECONSTRUCTED")
            continue
        note = "RECONSTRUCTED"
        report.add(check_id, verdict, ob.locus, binding, note)
    return report


def _discharge_one(f, u, budget):
    if isinstance(f, Quant) and f.kind == "forall":
        body = f.body
        if isinstance(body, Implies):
            conjuncts = [body.left, Not(body.right)]
        else:
            conjuncts = [Not(body)]
        ce = exists_plan(f.binders, conj(*conjuncts),
                         search_only=True).first({}, u, budget)
        if ce is None:
            return PASS, None
        return FAIL, _fill(ce, f.binders, u)
    if isinstance(f, Quant) and f.kind == "exists":
        w = exists_plan(f.binders, f.body, search_only=True).first({}, u, budget)
        if w is None:
            return FAIL, None
        return PASS, _fill(w, f.binders, u)
    ok = bool(enumerate_models(f, [], u, budget=budget))
    return (PASS, None) if ok else (FAIL, None)


# ---------------------------------------------------------------------------
# Semantic refinement oracle
# ---------------------------------------------------------------------------

@dataclass
class OracleResult:
    refines: bool
    trace: list | None = None      # distinguishing trace when not refines
    pairs_explored: int = 0

    def __bool__(self) -> bool:
        return self.refines


_CHAOS = "CHAOS"


def oracle_refines(old: LifecycleDoc, new: LifecycleDoc, env: SignatureEnv,
                   u, horizon: int, framed: bool = True,
                   pair_cap: int = 200_000) -> OracleResult:
    """Bounded trace inclusion of ``new`` in the chaotic completion of ``old``.

    Observables per step are (input message, output sequence, post
    valuation).  An input a configuration cannot process makes the rest
    of that run unconstrained (loose semantics); hence a stalling old
    configuration absorbs everything, while a stalling new configuration
    is covered only if some old configuration stalls too.  Exhaustive
    over all initial valuations and all inputs to the given horizon.
    """
    if old.cls != new.cls:
        return OracleResult(False, [("class-mismatch", old.cls, new.cls)])
    cls = new.cls
    pool = u.id_pools[cls]
    oid = pool[0]
    inputs: list = []
    for m in env.methods(cls):
        arg_carriers = [u.carrier(sort) for _, sort in m.params]
        for sender in u.carrier("@object"):
            stack = [()]
            for carrier in arg_carriers:
                stack = [args + (v,) for args in stack for v in carrier]
            inputs.extend(MsgValue(sender, oid, m.name, args)
                          for args in stack)

    old_ex = lifecycle_exec(old, env, u, framed)
    new_ex = lifecycle_exec(new, env, u, framed)
    budget = Budget(cap=10_000_000_000)
    # step results cached under each transition's dependency projection:
    # a transition's behavior is a function of the input message and the
    # few attributes its formulas actually depend on
    tx_cache: dict = {}

    def tx_results(tx, val: dict, msg) -> list:
        """(output seq, non-framed valuation updates) per completion,
        cached under the transition's dependency projection."""
        key = (id(tx), msg, tuple(val[k] for k in tx.dep_keys))
        hit = tx_cache.get(key)
        if hit is not None:
            return hit
        st_env = dict(val)
        st_env["self"] = oid
        st_env["in"] = msg
        results = []
        if tx.fires(st_env, u, budget):
            for seq, valuation, _ in tx.successors(st_env, u, budget):
                partial = tuple(sorted(
                    (a, v) for a, v in valuation.items()
                    if a not in tx.frame_attrs))
                results.append((seq, partial))
        tx_cache[key] = results
        return results

    def steps_of(ex, config, msg):
        control, val_items = config
        val = dict(val_items)
        results = []
        seen = set()
        for tx in ex.dispatch(control, msg):
            target = tx.transition.target
            for seq, partial in tx_results(tx, val, msg):
                val2 = dict(val)
                val2.update(partial)
                items = tuple(sorted(val2.items()))
                mark = (seq, items, target)
                if mark in seen:
                    continue
                seen.add(mark)
                results.append((seq, (target, items)))
        return results

    binders = _attr_binders(cls, env)
    initial_pairs: list = []
    for sname in sorted(new.initial_states):
        for w in enumerate_models(new.state_formula(sname), binders, u,
                                  budget=budget):
            val = tuple(sorted(w.items()))
            old_set = frozenset(
                (os_name, val) for os_name in sorted(old.initial_states)
                if _check_state(old, os_name, w, u, budget))
            if not old_set:
                return OracleResult(
                    False, [("initial", sname, dict(val))])
            initial_pairs.append(((sname, val), old_set))

    visited: dict = {}
    parents: dict = {}
    frontier: list = []
    for pair in initial_pairs:
        if pair not in visited:
            visited[pair] = 0
            parents[pair] = None
            frontier.append(pair)

    depth = 0
    while frontier and depth < horizon:
        next_frontier: list = []
        for pair in frontier:
            new_cfg, old_set = pair
            for msg in inputs:
                new_steps = steps_of(new_ex, new_cfg, msg)
                stalled = [oc for oc in sorted(old_set)
                           if not steps_of(old_ex, oc, msg)]
                if stalled:
                    continue  # chaos in old absorbs every continuation
                if not new_steps:
                    return OracleResult(False, _trace(
                        parents, pair, (msg, None, None)) )
                for seq, cfg2 in new_steps:
                    matches = frozenset(
                        oc2 for oc in old_set
                        for oseq, oc2 in steps_of(old_ex, oc, msg)
                        if oseq == seq and oc2[1] == cfg2[1])
                    if not matches:
                        return OracleResult(False, _trace(
                            parents, pair, (msg, seq, cfg2)))
                    pair2 = (cfg2, matches)
                    if pair2 not in visited:
                        if len(visited) >= pair_cap:
                            raise BudgetExceeded(
                                f"oracle pair cap {pair_cap} reached")
                        visited[pair2] = depth + 1
                        parents[pair2] = (pair, (msg, seq, cfg2))
                        next_frontier.append(pair2)
        frontier = next_frontier
        depth += 1
    return OracleResult(True, None, len(visited))


def _check_state(lc: LifecycleDoc, sname: str, binding: dict, u, budget):
    from .logic import evaluate
    return evaluate(lc.state_formula(sname), binding, u, budget)


def _trace(parents, pair, last):
    moves = [last]
    p = pair
    while parents.get(p) is not None:
        p, move = parents[p]
        moves.append(move)
    moves.reverse()
    start_control, start_val = p[0]
    steps = [("start", start_control, dict(start_val))]
    for msg, seq, cfg2 in moves:
        steps.append(("step", msg, seq, None if cfg2 is None else cfg2[0]))
    return steps


# ---------------------------------------------------------------------------
# Scripts
# ---------------------------------------------------------------------------

def parse_script(text: str) -> RefinementScript:
    script = RefinementScript()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            script.entries.append(_parse_script_line(line))
        except ParseError as e:
            raise ParseError(f"script line {lineno}: {e.reason}",
                             lineno, e.col) from None
    return script


def load_script(path: str | Path) -> RefinementScript:
    return parse_script(Path(path).read_text())


def _parse_script_line(line: str):
    fields = line.split()
    if fields and fields[0] == "rename":
        if len(fields) != 3:
            raise ParseError("rename needs an old and a new name", 1, 1)
        return Rename(fields[1], fields[2])
    if fields and fields[0] == "expect":
        if len(fields) != 3:
            raise ParseError("expect needs a document name and a path", 1, 1)
        return Expect(fields[1], fields[2])
    c = _Cursor(lex(line))
    tok = c.peek()
    head = tok.value
    if head == "addclass":
        c.advance()
        return Step("addclass", cls=_ident(c))
    if head == "addrel":
        c.advance()
        a = _parse_role(c)
        c.expect("--")
        b = _parse_role(c)
        return Step("addrel", roles=(a, b))
    if head == "refrel":
        c.advance()
        rolename = _ident(c)
        action = _ident(c)
        if action == "addrole":
            return Step("refrel", rolename=rolename,
                        action=("addrole", _ident(c)))
        if action == "card":
            n = c.expect(INT)
            return Step("refrel", rolename=rolename,
                        action=("card", str(n.value)))
        raise ParseError(f"unknown refrel action {action!r}",
                         tok.line, tok.col)
    if head == "addmeth":
        c.advance()
        target = _ident(c)
        return Step("addmeth", target=target, method=_parse_method_sig(c))
    if head == "addattr":
        c.advance()
        target = _ident(c)
        name = _ident(c)
        c.expect(":")
        return Step("addattr", target=target,
                    attr=(name, parse_sort_expr(c)))
    if head == "addstate":
        c.advance()
        target = _ident(c)
        state = _ident(c)
        c.expect(":")
        return Step("addstate", target=target, state=state,
                    formula=parse_formula(c))
    if head == "remstate":
        c.advance()
        return Step("remstate", target=_ident(c), state=_ident(c))
    if head == "split":
        c.advance()
        target = _ident(c)
        state = _ident(c)
        c.expect("=>")
        s1 = _ident(c)
        c.expect(":")
        f1 = parse_formula(c)
        c.expect(",")
        s2 = _ident(c)
        c.expect(":")
        f2 = parse_formula(c)
        return Step("split", target=target, state=state,
                    split_into=((s1, f1), (s2, f2)))
    if head == "addtrans":
        c.advance()
        target = _ident(c)
        return Step("addtrans", target=target, transition=parse_transition(c))
    if head == "remtrans":
        c.advance()
        return Step("remtrans", target=_ident(c), tname=_ident(c))
    if head == "reftrans":
        c.advance()
        target = _ident(c)
        t = parse_transition(c)
        return Step("reftrans", target=target, tname=t.tname, transition=t)
    if head == "reminit":
        c.advance()
        return Step("reminit", target=_ident(c), state=_ident(c))
    raise ParseError(f"unknown script directive {head!r}", tok.line, tok.col)


def replay_script(ds: DocumentSet, script: RefinementScript, u=None):
    """Apply a script in order, discharging every obligation.

    Returns (final DocumentSet, ConditionReport).  The first failing
    step aborts the replay with the partial report; expectations compare
    the canonical rendering against golden files byte for byte.
    """
    report = ConditionReport()
    current = ds
    base = ds.base_dir or Path(".")
    for i, entry in enumerate(script.entries):
        if isinstance(entry, Rename):
            doc = current.get(entry.old)
            if doc is None:
                report.add(f"script:{i}:rename", FAIL, entry.old, None,
                           "no such document")
                return current, report
            from .documents import with_name
            try:
                current = current.replace_doc(entry.old,
                                              with_name(doc, entry.new))
            except ViewforgeError as e:
                report.add(f"script:{i}:rename", FAIL, entry.old, None, str(e))
                return current, report
            report.add(f"script:{i}:rename:{entry.old}->{entry.new}", PASS,
                       entry.old)
            continue
        if isinstance(entry, Expect):
            doc = current.get(entry.doc_name)
            golden = base / entry.golden_path
            if doc is None or not golden.is_file():
                report.add(f"script:{i}:expect:{entry.doc_name}", FAIL,
                           entry.doc_name, None, "missing document or golden")
                return current, report
            got = render_document(doc)
            want = golden.read_text()
            if got == want:
                report.add(f"script:{i}:expect:{entry.doc_name}", PASS,
                           entry.doc_name)
            else:
                report.add(f"script:{i}:expect:{entry.doc_name}", FAIL,
                           entry.doc_name, None,
                           f"rendering differs from {golden}")
                return current, report
            continue
        try:
            current, obligations = apply_step(current, entry)
        except StepError as e:
            report.add(f"script:{i}:{entry.kind}", FAIL, entry.kind, None,
                       str(e))
            return current, report
        uni = current.universe() if u is None else u
        sub = discharge(obligations, uni, current.budget)
        for r in sub.results:
            r.check_id = f"script:{i}:{r.check_id}"
        report.extend(sub)
        if sub.verdict == FAIL:
            return current, report
        report.add(f"script:{i}:{entry.kind}", PASS, entry.kind)
    return current, report
