"""Evaluation and bounded model enumeration for the predicate language.

Formulas are compiled once into closure trees.  Quantifier blocks are
*planned*: conjuncts that pin a bound variable (equalities, message
destructuring, set membership) bind it directly instead of looping over
the carrier, variables the body never reads are not looped at all, and
``forall`` is reduced to a negated witness search.  The planner changes
cost, never meaning; the test suite cross-checks it against a naive
tree-walking interpreter on randomized formulas.
"""

from __future__ import annotations

from .documents import TransitionDef
from .errors import (
    ArithmeticOverflow, BudgetExceeded, PatternVariableClash, SortError,
    SortMismatch, UnboundVariable,
)
from .formulas import (
    And, Arith, BoolLit, Cmp, IdLit, Implies, IntLit, MsgTerm, NameTerm, Not,
    Or, ProjTerm, Quant, SeqTerm, SetLit, SetOp, SndrTerm, ValueLit, conj,
    prime_formula, RESERVED_VARS, TRUE,
)
from .values import (
    EXTERNAL, EnumValue, IntValue, MsgValue, ObjectId, SeqValue, SetValue,
    is_external, value_key,
)

DEFAULT_EVAL_BUDGET = 20_000_000
DEFAULT_PRODUCT_CAP = 2_000_000

prime = prime_formula


class Budget:
    """Work meter shared across one check; exceeding the cap raises."""

    __slots__ = ("cap", "used")

    def __init__(self, cap: int = DEFAULT_EVAL_BUDGET):
        self.cap = cap
        self.used = 0

    def tick(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.cap:
            raise BudgetExceeded(
                f"enumeration budget of {self.cap} exhausted")


# ---------------------------------------------------------------------------
# Term compilation
# ---------------------------------------------------------------------------

_MISS = object()


def compile_term(t):
    """Compile a term to fn(env, u) -> value."""
    if isinstance(t, NameTerm):
        key = t.key
        if t.primed:
            def fn(env, u, _key=key):
                v = env.get(_key, _MISS)
                if v is _MISS:
                    raise UnboundVariable(_key)
                return v
            return fn

        def fn(env, u, _key=key):
            v = env.get(_key, _MISS)
            if v is not _MISS:
                return v
            lit = u.literal(_key)
            if lit is None:
                raise UnboundVariable(_key)
            return lit
        return fn
    if isinstance(t, IntLit):
        value = IntValue(None, t.n)
        return lambda env, u: value
    if isinstance(t, IdLit):
        cls, index = t.cls, t.index
        return lambda env, u: u.object_id(cls, index)
    if isinstance(t, ValueLit):
        value = t.value
        return lambda env, u: value
    if isinstance(t, SetLit):
        fns = tuple(compile_term(e) for e in t.elems)
        return lambda env, u: SetValue(frozenset(fn(env, u) for fn in fns))
    if isinstance(t, SetOp):
        lf, rf = compile_term(t.left), compile_term(t.right)
        union = t.op == "union"

        def fn(env, u):
            lv, rv = lf(env, u), rf(env, u)
            if not isinstance(lv, SetValue) or not isinstance(rv, SetValue):
                raise SortMismatch(f"set operation on non-sets: {lv!r}, {rv!r}")
            return SetValue(lv.elems | rv.elems if union else lv.elems - rv.elems)
        return fn
    if isinstance(t, Arith):
        lf, rf = compile_term(t.left), compile_term(t.right)
        plus = t.op == "+"

        def fn(env, u):
            lv, rv = lf(env, u), rf(env, u)
            if not isinstance(lv, IntValue) or not isinstance(rv, IntValue):
                raise SortMismatch(f"arithmetic on non-integers: {lv!r}, {rv!r}")
            n = lv.n + rv.n if plus else lv.n - rv.n
            sort = lv.sort if lv.sort is not None else rv.sort
            if sort is not None:
                lo, hi = u.int_ranges[sort]
                if not lo <= n <= hi:
                    raise ArithmeticOverflow(
                        f"{n} outside {sort} range {lo}..{hi}")
            return IntValue(sort, n)
        return fn
    if isinstance(t, MsgTerm):
        sf = compile_term(t.sender) if t.sender is not None else None
        rf = compile_term(t.receiver) if t.receiver is not None else None
        afs = tuple(compile_term(a) for a in t.args)
        name = t.name

        def fn(env, u):
            me = None
            if sf is None or rf is None:
                me = env.get("self", _MISS)
                if me is _MISS:
                    raise UnboundVariable("self")
            sender = sf(env, u) if sf is not None else me
            receiver = rf(env, u) if rf is not None else me
            return MsgValue(sender, receiver, name,
                            tuple(fn(env, u) for fn in afs))
        return fn
    if isinstance(t, SeqTerm):
        fns = tuple(compile_term(e) for e in t.elems)

        def fn(env, u):
            msgs = tuple(fn(env, u) for fn in fns)
            if any(not isinstance(m, MsgValue) for m in msgs):
                raise SortMismatch("sequence elements must be messages")
            return SeqValue(msgs)
        return fn
    if isinstance(t, ProjTerm):
        bf, idx = compile_term(t.base), t.index

        def fn(env, u):
            v = bf(env, u)
            if not isinstance(v, MsgValue) or idx >= len(v.args):
                raise SortMismatch(f"cannot project argument {idx} of {v!r}")
            return v.args[idx]
        return fn
    if isinstance(t, SndrTerm):
        bf = compile_term(t.base)

        def fn(env, u):
            v = bf(env, u)
            if not isinstance(v, MsgValue):
                raise SortMismatch(f"sndr of non-message {v!r}")
            return v.sender
        return fn
    raise TypeError(f"not a term: {t!r}")


def _compile_cmp(f: Cmp):
    lf, rf = compile_term(f.left), compile_term(f.right)
    op = f.op
    if op == "=":
        return lambda env, u, budget: lf(env, u) == rf(env, u)
    if op == "/=":
        return lambda env, u, budget: lf(env, u) != rf(env, u)
    if op == "isin":
        def fn(env, u, budget):
            rv = rf(env, u)
            if not isinstance(rv, SetValue):
                raise SortMismatch(f"isin against non-set {rv!r}")
            return lf(env, u) in rv.elems
        return fn
    if op == "subseteq":
        def fn(env, u, budget):
            lv, rv = lf(env, u), rf(env, u)
            if not isinstance(lv, SetValue) or not isinstance(rv, SetValue):
                raise SortMismatch("subseteq on non-sets")
            return lv.elems <= rv.elems
        return fn
    raise TypeError(f"unknown comparison {op!r}")


# ---------------------------------------------------------------------------
# Quantifier planning
# ---------------------------------------------------------------------------

# plan step kinds
_BIND = 0      # key := eval(term), fail path if outside carrier
_DESTRUCT = 1  # match a message value against a constructor pattern
_MLOOP = 2     # loop key over members of an evaluated set
_LOOP = 3      # loop key over the carrier
_SKIP = 4      # unread variable: require nonempty carrier only
_CHECK = 5     # residual conjunct
_FIRST = 6     # choice-irrelevant variable: bind the first carrier value


class _Step:
    __slots__ = ("kind", "key", "fn", "sort", "slots", "name", "arity",
                 "raw_reads", "fail_reads")

    def __init__(self, kind, key=None, fn=None, sort=None,
                 slots=None, name=None, arity=0,
                 raw_reads=frozenset(), fail_reads=frozenset()):
        self.kind = kind
        self.key = key
        self.fn = fn
        self.sort = sort
        self.slots = slots
        self.name = name
        self.arity = arity
        self.raw_reads = raw_reads    # every name the step evaluates
        self.fail_reads = fail_reads  # names its success can depend on


def _flatten_conjuncts(f) -> list:
    if isinstance(f, And):
        out = []
        for p in f.parts:
            out.extend(_flatten_conjuncts(p))
        return out
    if isinstance(f, BoolLit) and f.value:
        return []
    return [f]


def _pattern_slots(pattern: MsgTerm, pending: dict, bound_now: set):
    """Compile slots of a message pattern.

    Returns (slots, newly_bound, fixed_reads): each slot is
    ('bind', field, key, sort) | ('cmp', field, term_fn) | ('self', field)
    over sender, receiver and the arguments in order; fixed_reads are the
    names the comparison slots evaluate.
    """
    slots = []
    newly = []
    fixed_reads: set = set()

    def one(term, field_idx):
        if term is None:
            slots.append(("self", field_idx))
            fixed_reads.add("self")
            return
        if (isinstance(term, NameTerm) and term.key in pending
                and term.key not in bound_now and term.key not in newly):
            newly.append(term.key)
            slots.append(("bind", field_idx, term.key, pending[term.key]))
        else:
            slots.append(("cmp", field_idx, compile_term(term)))
            fixed_reads.update(_reads(term))

    one(pattern.sender, -2)
    one(pattern.receiver, -1)
    for i, a in enumerate(pattern.args):
        one(a, i)
    return slots, newly, frozenset(fixed_reads)


def _may_raise(t) -> bool:
    """Term evaluation can fail on in-range inputs (overflow, projection)."""
    if isinstance(t, (Arith, ProjTerm, SndrTerm)):
        return True
    if isinstance(t, SetLit):
        return any(_may_raise(e) for e in t.elems)
    if isinstance(t, SetOp):
        return _may_raise(t.left) or _may_raise(t.right)
    if isinstance(t, MsgTerm):
        parts = [x for x in (t.sender, t.receiver) if x is not None]
        return any(_may_raise(x) for x in (*parts, *t.args))
    if isinstance(t, SeqTerm):
        return any(_may_raise(e) for e in t.elems)
    return False


def _try_plan_conjunct(c, pending, planned_keys):
    """Return (step, bound_keys) if the conjunct can bind variables now."""
    if not isinstance(c, Cmp):
        return None
    remaining = {k: s for k, s in pending.items() if k not in planned_keys}
    if not remaining:
        return None
    if c.op == "=":
        for var_side, other in ((c.left, c.right), (c.right, c.left)):
            if (isinstance(var_side, NameTerm) and var_side.key in remaining
                    and not (_reads(other) & set(remaining))):
                key = var_side.key
                reads = frozenset(_reads(other))
                step = _Step(_BIND, key=key, fn=compile_term(other),
                             sort=remaining[key], raw_reads=reads,
                             fail_reads=reads if _may_raise(other)
                             else frozenset())
                return step, [key]
        for pat_side, val_side in ((c.left, c.right), (c.right, c.left)):
            if (isinstance(pat_side, MsgTerm)
                    and not (_reads(val_side) & set(remaining))):
                pat_reads = _reads(pat_side)
                binds = pat_reads & set(remaining)
                if not binds:
                    continue
                # every non-binding piece must be evaluable now
                slots, newly, fixed = _pattern_slots(pat_side, remaining,
                                                     set())
                deferred = pat_reads - set(newly)
                if deferred & set(remaining):
                    continue
                reads = frozenset(_reads(val_side)) | fixed
                step = _Step(_DESTRUCT, fn=compile_term(val_side),
                             slots=slots, name=pat_side.name,
                             arity=len(pat_side.args), raw_reads=reads,
                             fail_reads=reads)
                return step, newly
    if c.op == "isin":
        if (isinstance(c.left, NameTerm) and c.left.key in remaining
                and not (_reads(c.right) & set(remaining))):
            key = c.left.key
            reads = frozenset(_reads(c.right))
            step = _Step(_MLOOP, key=key, fn=compile_term(c.right),
                         sort=remaining[key], raw_reads=reads,
                         fail_reads=reads)
            return step, [key]
    return None


def _reads(t) -> set:
    from .formulas import term_free_vars
    return term_free_vars(t)


def _formula_reads(f) -> set:
    from .formulas import free_vars
    return free_vars(f)


_ANALYZE_CACHE: dict = {}


def _analyze(f) -> frozenset:
    """Names whose values can change a formula's truth.

    Tighter than the free-variable set: inside quantifier blocks the
    names read only by infallible bindings (frame equations, output
    assembly) do not influence satisfiability and are excluded.
    """
    cached = _ANALYZE_CACHE.get(id(f))
    if cached is not None and cached[0] is f:
        return cached[1]
    if isinstance(f, BoolLit):
        reads = frozenset()
    elif isinstance(f, Cmp):
        reads = frozenset(_reads(f.left) | _reads(f.right))
    elif isinstance(f, Not):
        reads = _analyze(f.body)
    elif isinstance(f, (And, Or)):
        reads = frozenset().union(*[_analyze(p) for p in f.parts]) \
            if f.parts else frozenset()
    elif isinstance(f, Implies):
        reads = _analyze(f.left) | _analyze(f.right)
    elif isinstance(f, Quant):
        reads = _plan_for(f).result_reads
    else:
        raise TypeError(f"not a formula: {f!r}")
    _ANALYZE_CACHE[id(f)] = (f, reads)
    return reads


class _ExistsPlan:
    """Witness search over a block of existential binders and conjuncts.

    With ``search_only`` the plan may additionally demote loops whose
    choice provably cannot change satisfiability (they feed only
    infallible bindings) to a single representative value; such plans
    answer yes/no questions and representative witnesses, but not
    complete witness enumeration.
    """

    def __init__(self, binders: tuple, conjuncts: list,
                 search_only: bool = False):
        pending = dict(binders)
        steps: list[_Step] = []
        consumed: set = set()
        planned: set = set()
        conjunct_reads = [_formula_reads(c) for c in conjuncts]

        while len(planned) < len(pending):
            progress = True
            while progress:
                progress = False
                for idx, c in enumerate(conjuncts):
                    if idx in consumed:
                        continue
                    got = _try_plan_conjunct(c, pending, planned)
                    if got is None:
                        continue
                    step, bound = got
                    steps.append(step)
                    planned.update(bound)
                    consumed.add(idx)
                    progress = True
            unplanned = [k for k in pending if k not in planned]
            if not unplanned:
                break
            # stuck: loop the first still-read variable that has a sort,
            # then give propagation another chance; unread variables are
            # never looped, only checked for a nonempty carrier
            read_later: set = set()
            for idx, reads in enumerate(conjunct_reads):
                if idx not in consumed:
                    read_later |= reads
            loopable = [k for k in unplanned
                        if k in read_later and pending[k] is not None]
            if loopable:
                key = loopable[0]
                steps.append(_Step(_LOOP, key=key, sort=pending[key]))
                planned.add(key)
                continue
            for key in unplanned:
                kind = _LOOP if key in read_later else _SKIP
                steps.append(_Step(kind, key=key, sort=pending[key]))
                planned.add(key)
            break
        # schedule residual conjuncts right after their last binding step
        residual = [c for idx, c in enumerate(conjuncts)
                    if idx not in consumed]
        bound_at = {}
        for pos, step in enumerate(steps):
            if step.kind in (_BIND, _MLOOP, _LOOP, _SKIP):
                bound_at[step.key] = pos
            elif step.kind == _DESTRUCT:
                for slot in step.slots:
                    if slot[0] == "bind":
                        bound_at[slot[2]] = pos
        inserts: list = []
        for c in residual:
            syntactic = frozenset(_formula_reads(c))
            needs = syntactic & set(pending)
            pos = max((bound_at[k] for k in needs if k in bound_at), default=-1)
            inserts.append((pos, _Step(_CHECK, fn=compile_formula(c),
                                       raw_reads=syntactic,
                                       fail_reads=_analyze(c))))
        final: list[_Step] = []
        for pos in range(-1, len(steps)):
            if pos >= 0:
                final.append(steps[pos])
            for at, step in inserts:
                if at == pos:
                    final.append(step)

        # dependence analysis: which names can the overall answer depend
        # on?  origins map plan-bound keys to the outer names / choice
        # variables their values derive from.
        origin: dict = {}

        def expand(names) -> set:
            out: set = set()
            for n in names:
                src = origin.get(n)
                if src is None:
                    out.add(n)
                else:
                    out |= src
            return out

        needed: set = set()
        syntactic_all: set = set()
        for step in final:
            syntactic_all |= step.raw_reads
            needed |= expand(step.fail_reads)
            if step.kind == _BIND:
                origin[step.key] = expand(step.raw_reads)
            elif step.kind == _DESTRUCT:
                sources = expand(step.raw_reads)
                for slot in step.slots:
                    if slot[0] == "bind":
                        origin[slot[2]] = sources
            elif step.kind == _MLOOP:
                origin[step.key] = expand(step.raw_reads)
            elif step.kind in (_LOOP, _SKIP, _FIRST):
                origin[step.key] = {step.key}

        if search_only:
            for step in final:
                if step.kind == _LOOP and step.key not in needed:
                    step.kind = _FIRST if step.key in syntactic_all else _SKIP

        self.steps = final
        self.binder_keys = tuple(k for k, _ in binders)
        binder_set = set(self.binder_keys)
        self.result_reads = frozenset(needed - binder_set)
        # outer names each bound variable's value can derive from
        self.key_origins = {
            key: frozenset(origin.get(key, {key}) - binder_set)
            for key in self.binder_keys}

    # -- search -------------------------------------------------------------
    #
    # Both drivers mutate the shared env dict and restore prior values on
    # the way out (binder names may shadow outer bindings).

    def search(self, env, u, budget) -> bool:
        return self._walk(0, env, u, budget, None, 0)

    def witnesses(self, env, u, budget, limit: int = 0) -> list:
        """Binding dicts for satisfying completions, in plan order.

        ``limit`` 0 collects all witnesses; a positive limit stops early.
        """
        out: list = []
        self._walk(0, env, u, budget, out, limit)
        return out

    def first(self, env, u, budget):
        """The first witness, or None."""
        out = self.witnesses(env, u, budget, limit=1)
        return out[0] if out else None

    def _walk(self, i, env, u, budget, out, limit) -> bool:
        steps = self.steps
        if i == len(steps):
            if out is None:
                return True
            out.append({k: env[k] for k in self.binder_keys if k in env})
            return bool(limit) and len(out) >= limit
        step = steps[i]
        kind = step.kind
        if kind == _CHECK:
            return step.fn(env, u, budget) and self._walk(
                i + 1, env, u, budget, out, limit)
        if kind == _BIND:
            v = step.fn(env, u)
            if step.sort is not None and v not in u.carrier_set(step.sort):
                # an equation between different sorts is ill-typed, not false
                raise SortMismatch(
                    f"value {v!r} bound to {step.key!r} lies outside its sort")
            key = step.key
            old = env.get(key, _MISS)
            env[key] = v
            ok = self._walk(i + 1, env, u, budget, out, limit)
            if old is _MISS:
                del env[key]
            else:
                env[key] = old
            return ok
        if kind == _FIRST:
            carrier = u.carrier(step.sort)
            if not carrier:
                return False
            key = step.key
            old = env.get(key, _MISS)
            env[key] = carrier[0]
            ok = self._walk(i + 1, env, u, budget, out, limit)
            if old is _MISS:
                del env[key]
            else:
                env[key] = old
            return ok
        if kind == _DESTRUCT:
            v = step.fn(env, u)
            if (not isinstance(v, MsgValue) or v.name != step.name
                    or len(v.args) != step.arity):
                return False
            saved: list = []
            ok = True
            for slot in step.slots:
                part = (v.sender if slot[1] == -2
                        else v.receiver if slot[1] == -1 else v.args[slot[1]])
                if slot[0] == "bind":
                    key = slot[2]
                    saved.append((key, env.get(key, _MISS)))
                    env[key] = part
                elif slot[0] == "self":
                    me = env.get("self", _MISS)
                    if me is _MISS:
                        raise UnboundVariable("self")
                    if part != me:
                        ok = False
                        break
                else:
                    if part != slot[2](env, u):
                        ok = False
                        break
            if ok:
                ok = self._walk(i + 1, env, u, budget, out, limit)
            for key, old in reversed(saved):
                if old is _MISS:
                    del env[key]
                else:
                    env[key] = old
            return ok
        if kind in (_MLOOP, _LOOP):
            if kind == _MLOOP:
                sv = step.fn(env, u)
                if not isinstance(sv, SetValue):
                    raise SortMismatch(f"isin against non-set {sv!r}")
                values = sorted(sv.elems, key=value_key)
            else:
                if step.sort is None:
                    raise SortError(
                        f"quantified variable {step.key!r} has no sort "
                        f"annotation")
                values = u.carrier(step.sort)
            key = step.key
            old = env.get(key, _MISS)
            found = False
            for v in values:
                budget.tick()
                env[key] = v
                if self._walk(i + 1, env, u, budget, out, limit):
                    found = True
                    break
            if old is _MISS:
                env.pop(key, None)
            else:
                env[key] = old
            return found
        if kind == _SKIP:
            if step.sort is None:
                raise SortError(
                    f"quantified variable {step.key!r} has no sort annotation")
            if not u.carrier(step.sort):
                return False
            return self._walk(i + 1, env, u, budget, out, limit)
        raise AssertionError(step.kind)


def exists_plan(binders: tuple, body, search_only: bool = False) -> _ExistsPlan:
    """Build a witness-search plan for ``exists binders . body``.

    Pass ``search_only`` when only satisfiability or a single
    representative witness is needed; full witness enumeration requires
    the default.
    """
    return _ExistsPlan(binders, _flatten_conjuncts(body), search_only)


_PLAN_CACHE: dict = {}


def _plan_for(f: Quant) -> _ExistsPlan:
    """The (cached, search-only) plan realizing a quantifier node.

    ``forall binders . A -> B`` is realized as the counterexample search
    ``exists binders . A and not B``.
    """
    cached = _PLAN_CACHE.get(id(f))
    if cached is not None and cached[0] is f:
        return cached[1]
    binders = f.binders
    body = f.body
    if f.kind == "exists":
        while isinstance(body, Quant) and body.kind == "exists":
            binders = binders + body.binders
            body = body.body
        plan = _ExistsPlan(binders, _flatten_conjuncts(body),
                           search_only=True)
    else:
        while isinstance(body, Quant) and body.kind == "forall":
            binders = binders + body.binders
            body = body.body
        if isinstance(body, Implies):
            conjuncts = _flatten_conjuncts(body.left) + [Not(body.right)]
        else:
            conjuncts = [Not(body)]
        plan = _ExistsPlan(binders, conjuncts, search_only=True)
    _PLAN_CACHE[id(f)] = (f, plan)
    return plan


# ---------------------------------------------------------------------------
# Formula compilation
# ---------------------------------------------------------------------------

_COMPILE_CACHE: dict = {}


def compile_formula(f):
    """Compile a formula to fn(env, u, budget) -> bool (cached)."""
    cached = _COMPILE_CACHE.get(id(f))
    if cached is not None and cached[0] is f:
        return cached[1]
    fn = _compile(f)
    _COMPILE_CACHE[id(f)] = (f, fn)
    return fn


def _compile(f):
    if isinstance(f, BoolLit):
        value = f.value
        return lambda env, u, budget: value
    if isinstance(f, Cmp):
        return _compile_cmp(f)
    if isinstance(f, Not):
        inner = compile_formula(f.body)
        return lambda env, u, budget: not inner(env, u, budget)
    if isinstance(f, And):
        parts = tuple(compile_formula(p) for p in f.parts)

        def fn(env, u, budget):
            for p in parts:
                if not p(env, u, budget):
                    return False
            return True
        return fn
    if isinstance(f, Or):
        parts = tuple(compile_formula(p) for p in f.parts)

        def fn(env, u, budget):
            for p in parts:
                if p(env, u, budget):
                    return True
            return False
        return fn
    if isinstance(f, Implies):
        lf, rf = compile_formula(f.left), compile_formula(f.right)
        return lambda env, u, budget: not lf(env, u, budget) or rf(env, u, budget)
    if isinstance(f, Quant):
        plan = _plan_for(f)
        if f.kind == "exists":
            return lambda env, u, budget: plan.search(env, u, budget)
        return lambda env, u, budget: not plan.search(env, u, budget)
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def evaluate(f, binding: dict, u, budget: Budget | None = None) -> bool:
    """Truth value of a formula under a binding in a finite universe."""
    if budget is None:
        budget = Budget()
    env = dict(binding)
    return compile_formula(f)(env, u, budget)


def eval_term(t, binding: dict, u):
    """Value of a term under a binding."""
    return compile_term(t)(dict(binding), u)


def enumerate_models(f, variables, u, limit: int | None = None,
                     product_cap: int = DEFAULT_PRODUCT_CAP,
                     budget: Budget | None = None) -> list:
    """All (or the first ``limit``) satisfying bindings of ``f``.

    ``variables`` is an ordered list of (name, sort key); bindings come
    back in lexicographic order over the carrier orderings.  Raises
    BudgetExceeded when the raw product of carrier sizes exceeds
    ``product_cap``.
    """
    if budget is None:
        budget = Budget()
    product = 1
    carriers = []
    for name, sort in variables:
        c = u.carrier(sort)
        carriers.append((name, c))
        product *= len(c)
        if product > product_cap:
            raise BudgetExceeded(
                f"carrier product exceeds cap {product_cap}")
    fn = compile_formula(f)
    results: list = []

    def rec(i, env):
        if limit is not None and len(results) >= limit:
            return
        if i == len(carriers):
            budget.tick()
            if fn(env, u, budget):
                results.append({name: env[name] for name, _ in variables})
            return
        name, carrier = carriers[i]
        for v in carrier:
            env[name] = v
            rec(i + 1, env)
            if limit is not None and len(results) >= limit:
                break
        env.pop(name, None)

    rec(0, {})
    return results


def annotate(f, sorts: dict):
    """Fill missing quantifier sorts by variable name."""
    if isinstance(f, Quant):
        binders = tuple(
            (n, s if s is not None else sorts.get(n)) for n, s in f.binders)
        return Quant(f.kind, binders, annotate(f.body, sorts))
    if isinstance(f, Not):
        return Not(annotate(f.body, sorts))
    if isinstance(f, And):
        return And(tuple(annotate(p, sorts) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(annotate(p, sorts) for p in f.parts))
    if isinstance(f, Implies):
        return Implies(annotate(f.left, sorts), annotate(f.right, sorts))
    return f


def desugar_transition(t: TransitionDef, attrs=frozenset()):
    """Fold message patterns into plain pre/post formulas.

    Returns (pre', post'): the input pattern becomes an existential
    equation on ``in`` shared by both, the output patterns an equation
    binding ``out`` to a message sequence.  ``attrs`` names the class
    attributes so fresh output variables can be told apart from state
    references; quantifier sorts for pattern variables stay unannotated.
    """
    attrs = frozenset(attrs)
    in_binders: list = []
    in_eq = None
    known = set(RESERVED_VARS) | attrs
    if t.input_pattern is not None:
        ip = t.input_pattern
        seen = set()
        for v in (ip.sender_var, *ip.vars):
            if v in seen:
                raise PatternVariableClash(
                    f"pattern variable {v!r} repeated in {t.tname!r}")
            if v in known:
                raise PatternVariableClash(
                    f"pattern variable {v!r} shadows an attribute or "
                    f"reserved name in {t.tname!r}")
            seen.add(v)
        in_binders = [(ip.sender_var, "@object")]
        in_binders += [(v, None) for v in ip.vars]
        pattern = MsgTerm(NameTerm(ip.sender_var), None, ip.method,
                          tuple(NameTerm(v) for v in ip.vars))
        in_eq = Cmp("=", NameTerm("in"), pattern)
        known |= seen

    out_vars: list = []
    for pat in t.output_patterns:
        for name in sorted(_reads(pat)):
            if name.endswith("'"):
                raise PatternVariableClash(
                    f"primed variable {name!r} in output pattern of {t.tname!r}")
            if name not in known and name not in [v for v, _ in out_vars]:
                out_vars.append((name, None))
    out_eq = Cmp("=", NameTerm("out"), SeqTerm(tuple(t.output_patterns)))

    post_core = conj(out_eq, t.post)
    if out_vars:
        post_core = Quant("exists", tuple(out_vars), post_core)

    if in_eq is None:
        pre2 = t.pre
        post2 = post_core
    else:
        pre2 = Quant("exists", tuple(in_binders), conj(in_eq, t.pre))
        post2 = Quant("exists", tuple(in_binders), conj(in_eq, post_core))
    return pre2, post2
