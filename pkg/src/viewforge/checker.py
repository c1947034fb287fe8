"""Context conditions for lifecycle automata and cross-document consistency.

Every check produces one record with verdict PASS, FAIL or BUDGET.
FAIL carries a counterexample binding where one exists; PASS on an
existential check carries the found witness.  BUDGET means the bounded
search ran out of its configured budget and says nothing about truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .documents import LifecycleDoc, TypeDocument
from .errors import (
    AttributeCollision, BudgetExceeded, DocumentError, SortError,
    ViewforgeError,
)
from .formulas import Not, conj, free_vars
from .logic import Budget, desugar_transition, exists_plan
from .project import DocumentSet
from .system_model import (
    ACTIVE, MediumState, ObjectState, SignatureEnv, SystemConfig,
    lifecycle_exec,
)
from .values import render_value, value_key

PASS = "PASS"
FAIL = "FAIL"
BUDGET = "BUDGET"


@dataclass
class CheckResult:
    check_id: str
    verdict: str
    locus: str
    binding: dict | None = None
    note: str = ""


@dataclass
class ConditionReport:
    results: list = field(default_factory=list)

    def add(self, *args, **kwargs) -> CheckResult:
        r = CheckResult(*args, **kwargs)
        self.results.append(r)
        return r

    def extend(self, other: "ConditionReport") -> None:
        self.results.extend(other.results)

    @property
    def verdict(self) -> str:
        if any(r.verdict == FAIL for r in self.results):
            return FAIL
        if any(r.verdict == BUDGET for r in self.results):
            return BUDGET
        return PASS

    def failures(self) -> list:
        return [r for r in self.results if r.verdict == FAIL]

    def render_lines(self) -> list:
        lines = []
        for r in self.results:
            parts = [r.verdict, r.check_id, f"locus={r.locus}"]
            if r.binding is not None:
                parts.append("binding=" + render_binding(r.binding))
            if r.note:
                parts.append(f"note={r.note}")
            lines.append(" ".join(parts))
        return lines

    def render_records(self) -> list:
        return [
            {
                "id": r.check_id,
                "verdict": r.verdict,
                "locus": r.locus,
                "binding": None if r.binding is None else {
                    k: render_value(v)
                    for k, v in sorted(r.binding.items())},
                "note": r.note,
            }
            for r in self.results
        ]


def render_binding(binding: dict) -> str:
    inner = " , ".join(
        f"{k} = {render_value(v)}" for k, v in sorted(binding.items()))
    return "{ " + inner + " }" if inner else "{}"


# ---------------------------------------------------------------------------
# Automaton context conditions
# ---------------------------------------------------------------------------

def _attr_binders(cls: str, env: SignatureEnv) -> tuple:
    return tuple(sorted(env.attrs(cls).items()))


def _fill(binding: dict, binders: tuple, u) -> dict:
    """Complete a plan binding to a total one (unread variables get the
    first carrier value; any completion works since they were unread)."""
    out = dict(binding)
    for name, sort in binders:
        if name not in out:
            out[name] = u.carrier(sort)[0]
    return out


def check_automaton(lc: LifecycleDoc, env: SignatureEnv, u,
                    budget_cap: int | None = None) -> ConditionReport:
    """The three context conditions, each by bounded enumeration:

    1. every state predicate is satisfiable,
    2. state predicates are pairwise disjoint,
    3. every transition enabled under its precondition can complete:
       some assignment to outputs and primed attributes satisfies the
       postcondition together with the target state predicate.
    """
    report = ConditionReport()
    binders = _attr_binders(lc.cls, env)

    for sname, formula in lc.states:
        check_id = f"condition1:{lc.name}:{sname}"
        try:
            plan = exists_plan(binders, formula, search_only=True)
            witness = plan.first({}, u, _budget(budget_cap))
        except BudgetExceeded:
            report.add(check_id, BUDGET, f"{lc.name}/state {sname}")
            continue
        except ViewforgeError as e:
            report.add(check_id, FAIL, f"{lc.name}/state {sname}", None, str(e))
            continue
        if witness is None:
            report.add(check_id, FAIL, f"{lc.name}/state {sname}", None,
                       "state predicate unsatisfiable")
        else:
            report.add(check_id, PASS, f"{lc.name}/state {sname}",
                       _fill(witness, binders, u))

    for i, (s, fs) in enumerate(lc.states):
        for t, ft in lc.states[i + 1:]:
            check_id = f"condition2:{lc.name}:{s}|{t}"
            locus = f"{lc.name}/states {s},{t}"
            try:
                plan = exists_plan(binders, conj(fs, ft), search_only=True)
                overlap = plan.first({}, u, _budget(budget_cap))
            except BudgetExceeded:
                report.add(check_id, BUDGET, locus)
                continue
            except ViewforgeError as e:
                report.add(check_id, FAIL, locus, None, str(e))
                continue
            if overlap is None:
                report.add(check_id, PASS, locus)
            else:
                report.add(check_id, FAIL, locus, _fill(overlap, binders, u),
                           "state predicates overlap")

    ex = lifecycle_exec(lc, env, u)
    for tx in ex.transitions:
        t = tx.transition
        check_id = f"condition3:{lc.name}:{t.tname}"
        locus = f"{lc.name}/transition {t.tname}"
        ce_binders = (("self", lc.cls),) + binders + (("in", ("@in", lc.cls)),)
        ce_body = conj(tx.pre, lc.state_formula(t.source),
                       Not(tx.step_formula()))
        try:
            ce = exists_plan(ce_binders, ce_body, search_only=True).first(
                {}, u, _budget(budget_cap))
        except BudgetExceeded:
            report.add(check_id, BUDGET, locus)
            continue
        except ViewforgeError as e:
            report.add(check_id, FAIL, locus, None, str(e))
            continue
        if ce is None:
            report.add(check_id, PASS, locus)
        else:
            report.add(check_id, FAIL, locus, _fill(ce, ce_binders, u),
                       "enabled transition cannot complete")
    return report


def _budget(cap: int | None) -> Budget:
    return Budget(cap) if cap is not None else Budget()


# ---------------------------------------------------------------------------
# Cross-document consistency
# ---------------------------------------------------------------------------

def check_consistency(ds: DocumentSet, u=None) -> ConditionReport:
    """Structural layer first (names, sorts, signatures); when it passes,
    automaton context conditions and a bounded witness search."""
    report = ConditionReport()
    try:
        if u is None:
            u = ds.universe()
    except (SortError, DocumentError) as e:
        report.add("structure:universe", FAIL, "project", None, str(e))
        return report

    try:
        env = ds.signature_env()
    except (AttributeCollision, DocumentError) as e:
        report.add("structure:signatures", FAIL, "project", None, str(e))
        return report

    om = ds.object_model()
    declared = set(om.classes) if om is not None else set(env.classes())

    for cd in ds.class_documents():
        locus = cd.name
        if cd.cls not in declared:
            report.add(f"structure:class:{cd.name}", FAIL, locus, None,
                       f"UnknownClass {cd.cls!r}")
            continue
        bad = [s for _, s in list(cd.attributes) +
               [p for m in cd.methods for p in m.params]
               if not u.has_sort(s)]
        if bad:
            report.add(f"structure:sorts:{cd.name}", FAIL, locus, None,
                       f"UnknownSort {sorted(map(str, bad))}")
        else:
            report.add(f"structure:sorts:{cd.name}", PASS, locus)

    for cls in sorted(declared):
        if cls not in u.id_pools:
            report.add(f"structure:bounds:{cls}", FAIL, cls, None,
                       f"no identifier bound for class {cls!r}")

    for lc in ds.lifecycles():
        _check_lifecycle_structure(lc, env, u, declared, report)

    if report.verdict == FAIL:
        return report

    for lc in ds.lifecycles():
        report.extend(check_automaton(lc, env, u, ds.budget))
    if report.verdict != PASS:
        return report

    witness = witness_system(ds, u, dict(ds.bounds))
    if witness == BUDGET:
        report.add("semantic:witness", BUDGET, "project")
    elif witness is None:
        report.add("semantic:witness", FAIL, "project", None,
                   "no system inhabits all documents at these bounds")
    else:
        report.add("semantic:witness", PASS, "project", None,
                   f"{len(witness.objects)} objects")
    return report


def _check_lifecycle_structure(lc: LifecycleDoc, env: SignatureEnv, u,
                               declared: set, report: ConditionReport) -> None:
    locus = lc.name
    if lc.cls not in declared:
        report.add(f"structure:class:{lc.name}", FAIL, locus, None,
                   f"UnknownClass {lc.cls!r}")
        return
    attrs = env.attrs(lc.cls)
    ok_names = set(attrs) | {
        lit for lit in u.literal_sorts} | set()

    def names_ok(formula, allowed_extra, check_id, where):
        unknown = []
        for name in sorted(free_vars(formula)):
            base = name[:-1] if name.endswith("'") else name
            primed = name.endswith("'")
            if primed:
                if base not in attrs or base + "'" not in allowed_extra:
                    unknown.append(name)
            elif base not in ok_names and base not in allowed_extra:
                unknown.append(name)
        if unknown:
            report.add(check_id, FAIL, where, None,
                       f"UnknownAttribute {unknown}")
            return False
        return True

    for sname, formula in lc.states:
        names_ok(formula, set(), f"structure:state:{lc.name}:{sname}",
                 f"{lc.name}/state {sname}")

    for t in lc.transitions:
        where = f"{lc.name}/transition {t.tname}"
        if t.input_pattern is not None:
            ip = t.input_pattern
            if env.find_method(lc.cls, ip.method, len(ip.vars)) is None:
                report.add(f"structure:input:{lc.name}:{t.tname}", FAIL,
                           where, None,
                           f"UnknownMessage {ip.method}/{len(ip.vars)}")
                continue
        try:
            pre2, post2 = desugar_transition(t, frozenset(attrs))
        except ViewforgeError as e:
            report.add(f"structure:patterns:{lc.name}:{t.tname}", FAIL,
                       where, None, str(e))
            continue
        primed_ok = {a + "'" for a in attrs}
        ok = names_ok(pre2, {"in", "self"},
                      f"structure:pre:{lc.name}:{t.tname}", where)
        ok = names_ok(post2, {"in", "out", "self"} | primed_ok,
                      f"structure:post:{lc.name}:{t.tname}", where) and ok
        if not ok:
            continue
        for pat in t.output_patterns:
            recv_cls = _output_receiver_class(pat, t, attrs, lc.cls, env)
            if recv_cls is None or recv_cls == "@object":
                continue  # environment-bound or variable endpoint: unchecked
            if isinstance(recv_cls, tuple):
                report.add(f"structure:output:{lc.name}:{t.tname}", FAIL,
                           where, None,
                           f"receiver of {pat.name!r} is not an object")
                break
            if env.find_method(recv_cls, pat.name, len(pat.args)) is None:
                report.add(f"structure:output:{lc.name}:{t.tname}", FAIL,
                           where, None,
                           f"UnknownMessage {pat.name}/{len(pat.args)} "
                           f"on class {recv_cls!r}")
                break
        else:
            report.add(f"structure:transition:{lc.name}:{t.tname}", PASS,
                       where)


def _output_receiver_class(pat, t, attrs, cls, env):
    from .formulas import IdLit, NameTerm
    r = pat.receiver
    if isinstance(r, IdLit):
        return r.cls
    if isinstance(r, NameTerm) and not r.primed:
        if r.name == "self":
            return cls
        if r.name in attrs:
            return attrs[r.name]
        if t.input_pattern is not None:
            ip = t.input_pattern
            if r.name == ip.sender_var:
                return "@object"
            sig = env.find_method(cls, ip.method, len(ip.vars))
            if sig is not None and r.name in ip.vars:
                return sig.params[ip.vars.index(r.name)][1]
        return env.resolve_method_class(pat.name, len(pat.args))
    return None


# ---------------------------------------------------------------------------
# Witness search
# ---------------------------------------------------------------------------

def witness_system(ds: DocumentSet, u, bounds: dict):
    """A system configuration inhabiting every document, or None/BUDGET.

    ``bounds`` gives the number of ACTIVE objects per class; each active
    object sits in an initial automaton state with a valuation found by
    bounded search (classes without a lifecycle are unconstrained).
    """
    env = ds.signature_env()
    objects: dict = {}
    try:
        for cls in sorted(bounds):
            count = bounds[cls]
            if count == 0:
                continue
            if cls not in u.id_pools:
                return None
            pool = u.id_pools[cls]
            if count > len(pool):
                return None
            lc = ds.lifecycle_for(cls)
            binders = _attr_binders(cls, env)
            found = None
            if lc is None:
                found = ("", {})
            else:
                for sname in sorted(lc.initial_states):
                    plan = exists_plan(binders, lc.state_formula(sname),
                                       search_only=True)
                    witness = plan.first({}, u, Budget(ds.budget))
                    if witness is not None:
                        found = (sname, witness)
                        break
            if found is None:
                return None
            control, witness = found
            valuation = {
                a: witness.get(a, u.carrier(sort)[0]) for a, sort in binders}
            for oid in pool[:count]:
                objects[oid] = ObjectState(oid, dict(valuation),
                                           control or None, ACTIVE)
    except BudgetExceeded:
        return BUDGET
    return SystemConfig(objects, MediumState(max_delay=1), 0)


def render_system_config(config: SystemConfig) -> str:
    lines = [f"config clock={config.clock}"]
    for oid in sorted(config.objects, key=value_key):
        st = config.objects[oid]
        attrs = " ".join(
            f"{k}={render_value(v)}"
            for k, v in sorted(st.valuation.items()))
        control = st.control if st.control else "-"
        lines.append(
            f"object {render_value(oid)} control={control} "
            f"liveness={st.liveness} {attrs}".rstrip())
    queued = config.medium.queued()
    lines.append(
        f"medium max_delay={config.medium.max_delay} queued={len(queued)}")
    for entry in queued:
        lines.append(
            f"queued uid={entry.uid} eligible={entry.eligible_from} "
            f"msg={render_value(entry.msg.value())}")
    return "\n".join(lines) + "\n"
