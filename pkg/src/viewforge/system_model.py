"""Finite-scale semantic domain: signatures, object states, stepping, medium.

An object's state space is the product of its attribute carriers tagged
with an automaton control state; the communication medium is a family of
FIFO queues per (sender, receiver) pair with a bounded, seed-driven
delay.  Stepping functions are pure: they return fresh states.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .documents import (
    ClassDescriptionDoc, LifecycleDoc, MethodSig, ObjectModelDoc, ONE,
    TransitionDef,
)
from .errors import AttributeCollision, DocumentError, SortError
from .formulas import (
    And, Cmp, IdLit, MsgTerm, NameTerm, Quant, SeqTerm, conj, free_vars,
    prime_formula,
)
from .logic import Budget, compile_formula, desugar_transition, exists_plan
from .values import EXTERNAL, MsgValue, ObjectId, SeqValue, value_key

ACTIVE = "ACTIVE"
DORMANT = "DORMANT"


# ---------------------------------------------------------------------------
# Signatures
# ---------------------------------------------------------------------------

class SignatureEnv:
    """Per-class input alphabet and attribute environment."""

    def __init__(self):
        self._methods: dict = {}
        self._attrs: dict = {}

    def classes(self) -> tuple:
        return tuple(sorted(set(self._methods) | set(self._attrs)))

    def methods(self, cls: str) -> tuple:
        return self._methods.get(cls, ())

    def attrs(self, cls: str) -> dict:
        return self._attrs.get(cls, {})

    def find_method(self, cls: str, name: str, arity: int) -> MethodSig | None:
        for m in self._methods.get(cls, ()):
            if m.name == name and m.arity == arity:
                return m
        return None

    def resolve_method_class(self, name: str, arity: int) -> str | None:
        """The unique class declaring (name, arity), if any."""
        hits = [cls for cls in sorted(self._methods)
                if self.find_method(cls, name, arity) is not None]
        return hits[0] if len(hits) == 1 else None


def induce_signatures(om: ObjectModelDoc | None, cds) -> SignatureEnv:
    """Merge declared signatures with relationship-induced attributes.

    A role (c', rn, card) puts attribute rn on the opposite class: of
    sort c' for cardinality 1, of sort Set c' for cardinality *.  A
    declared attribute may coincide with an induced one when the sorts
    agree (the class description then documents the relationship);
    disagreement raises AttributeCollision.
    """
    env = SignatureEnv()
    classes = set(om.classes) if om is not None else set()
    for cd in cds:
        classes.add(cd.cls)
    for cls in sorted(classes):
        env._methods[cls] = ()
        env._attrs[cls] = {}

    for cd in cds:
        attrs = env._attrs[cd.cls]
        for name, sort in cd.attributes:
            if name in attrs and attrs[name] != sort:
                raise AttributeCollision(
                    f"attribute {name!r} of class {cd.cls!r} declared with "
                    f"two sorts")
            attrs[name] = sort
        methods = list(env._methods[cd.cls])
        for m in cd.methods:
            existing = next((x for x in methods
                             if x.name == m.name and x.arity == m.arity), None)
            if existing is not None:
                if existing != m:
                    raise DocumentError(
                        f"method {m.name}/{m.arity} of class {cd.cls!r} "
                        f"declared with two signatures")
                continue
            methods.append(m)
        env._methods[cd.cls] = tuple(
            sorted(methods, key=lambda m: (m.name, m.arity)))

    if om is not None:
        for rel in om.relationships:
            for mine, other in (rel.roles(), rel.roles()[::-1]):
                if other.rolename is None:
                    continue
                sort = other.cls if other.card == ONE else ("set", other.cls)
                attrs = env._attrs[mine.cls]
                if other.rolename in attrs and attrs[other.rolename] != sort:
                    raise AttributeCollision(
                        f"induced attribute {other.rolename!r} collides with "
                        f"a declared attribute of class {mine.cls!r}")
                attrs[other.rolename] = sort

    for cls in env._attrs:
        env._attrs[cls] = dict(sorted(env._attrs[cls].items()))
    return env


def input_messages(cls: str, env: SignatureEnv, u) -> tuple:
    """The finite input alphabet of a class at this universe's bounds."""
    msgs: list = []
    senders = u.carrier("@object")
    for m in env.methods(cls):
        arg_carriers = [u.carrier(sort) for _, sort in m.params]
        for receiver in u.id_pools[cls]:
            for sender in senders:
                stack = [()]
                for carrier in arg_carriers:
                    stack = [args + (v,) for args in stack for v in carrier]
                for args in stack:
                    msgs.append(MsgValue(sender, receiver, m.name, args))
    return tuple(msgs)


def ensure_input_carriers(env: SignatureEnv, u) -> None:
    for cls in env.classes():
        if cls in u.id_pools:
            u.register_input_carrier(cls, input_messages(cls, env, u))


# ---------------------------------------------------------------------------
# Runtime state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Message:
    sender: object
    receiver: object
    name: str
    args: tuple

    def value(self) -> MsgValue:
        return MsgValue(self.sender, self.receiver, self.name, self.args)

    @staticmethod
    def from_value(v: MsgValue) -> "Message":
        return Message(v.sender, v.receiver, v.name, v.args)


@dataclass(frozen=True)
class QueuedMessage:
    msg: Message
    uid: int
    eligible_from: int  # first tick at which delivery is allowed


@dataclass
class ObjectState:
    obj_id: ObjectId
    valuation: dict
    control: str | None
    liveness: str = ACTIVE

    def copy(self) -> "ObjectState":
        return ObjectState(self.obj_id, dict(self.valuation), self.control,
                           self.liveness)


@dataclass
class MediumState:
    max_delay: int = 1
    queues: dict = field(default_factory=dict)  # (sender, receiver) -> list

    def copy(self) -> "MediumState":
        return MediumState(self.max_delay,
                           {k: list(v) for k, v in self.queues.items()})

    def enqueue(self, entry: QueuedMessage) -> None:
        key = (entry.msg.sender, entry.msg.receiver)
        self.queues.setdefault(key, []).append(entry)

    def requeue_front(self, entry: QueuedMessage) -> None:
        key = (entry.msg.sender, entry.msg.receiver)
        self.queues.setdefault(key, []).insert(0, entry)

    def queued(self) -> list:
        out = []
        for key in sorted(self.queues,
                          key=lambda k: (value_key(k[1]), value_key(k[0]))):
            out.extend(self.queues[key])
        return out


@dataclass
class SystemConfig:
    objects: dict
    medium: MediumState
    clock: int = 0

    def copy(self) -> "SystemConfig":
        return SystemConfig({k: v.copy() for k, v in self.objects.items()},
                            self.medium.copy(), self.clock)


# ---------------------------------------------------------------------------
# Transition execution
# ---------------------------------------------------------------------------

class TransitionExec:
    """Desugared, annotated, frame-completed executable transition."""

    def __init__(self, lc: LifecycleDoc, t: TransitionDef, env: SignatureEnv,
                 u, framed: bool = True):
        self.transition = t
        self.cls = lc.cls
        attrs = env.attrs(lc.cls)
        attr_names = frozenset(attrs)

        var_sorts: dict = {}
        if t.input_pattern is not None:
            ip = t.input_pattern
            sig = env.find_method(lc.cls, ip.method, len(ip.vars))
            if sig is None:
                raise DocumentError(
                    f"transition {t.tname!r}: no method "
                    f"{ip.method}/{len(ip.vars)} on class {lc.cls!r}")
            var_sorts[ip.sender_var] = "@object"
            for v, (_, sort) in zip(ip.vars, sig.params):
                var_sorts[v] = sort

        # resolve fresh output-variable sorts from receiver classes
        out_binders: list = []
        for pat in t.output_patterns:
            recv_sort = self._receiver_sort(pat, var_sorts, attrs, lc.cls, env)
            if (isinstance(pat.receiver, NameTerm)
                    and not pat.receiver.primed
                    and pat.receiver.name not in var_sorts
                    and pat.receiver.name not in attr_names
                    and pat.receiver.name not in ("self",)):
                if recv_sort is not None:
                    var_sorts[pat.receiver.name] = recv_sort
                    out_binders.append((pat.receiver.name, recv_sort))
                else:
                    out_binders.append((pat.receiver.name, None))
            sig = None
            if isinstance(recv_sort, str) and recv_sort != "@object":
                sig = env.find_method(recv_sort, pat.name, len(pat.args))
            for i, a in enumerate(pat.args):
                if (isinstance(a, NameTerm) and not a.primed
                        and a.name not in var_sorts
                        and a.name not in attr_names
                        and a.name != "self"):
                    sort = sig.params[i][1] if sig is not None else None
                    var_sorts[a.name] = sort
                    out_binders.append((a.name, sort))

        self.var_sorts = var_sorts

        # pre': input pattern folded into an existential equation on `in`
        pre2, _ = desugar_transition(t, attr_names)
        from .logic import annotate
        self.pre = annotate(pre2, var_sorts)
        self._pre_fn = compile_formula(self.pre)

        # post block: exists (pattern vars, out, primed attrs) . in-eq and
        # out-eq and post and frames and primed state predicate of target
        binders: list = []
        conjuncts: list = []
        if t.input_pattern is not None:
            ip = t.input_pattern
            binders.append((ip.sender_var, "@object"))
            binders.extend((v, var_sorts[v]) for v in ip.vars)
            conjuncts.append(Cmp("=", NameTerm("in"),
                                 MsgTerm(NameTerm(ip.sender_var), None,
                                         ip.method,
                                         tuple(NameTerm(v) for v in ip.vars))))
        binders.extend(out_binders)
        binders.append(("out", None))
        conjuncts.append(Cmp("=", NameTerm("out"), SeqTerm(t.output_patterns)))
        conjuncts.extend(t.post.parts if isinstance(t.post, And) else (t.post,))

        mentioned = {name[:-1] for name in free_vars(t.post)
                     if name.endswith("'")}
        frame_attrs = []
        for a in attrs:
            binders.append((a + "'", attrs[a]))
            if framed and a not in mentioned and a not in t.havoc:
                conjuncts.append(Cmp("=", NameTerm(a, primed=True),
                                     NameTerm(a)))
                frame_attrs.append(a)
        self.frame_attrs = frozenset(frame_attrs)
        target_formula = prime_formula(lc.state_formula(t.target), attrs)
        conjuncts.append(target_formula)

        self.post_binders = tuple(binders)
        self.post_conjuncts = tuple(conjuncts)
        self._plan = exists_plan(self.post_binders, conj(*self.post_conjuncts))
        self.attr_names = tuple(sorted(attrs))
        self.attr_sorts = dict(attrs)
        self.framed = framed

        # outer names the firing decision and the successor set depend on;
        # lets callers cache step results under a small projection of the
        # object state.  Frame-copied attributes are excluded: their
        # primed values are the identity on the input by construction.
        from .logic import _analyze
        deps = set(_analyze(self.pre)) | set(self._plan.result_reads)
        framed_keys = {a + "'" for a in self.frame_attrs}
        for key, sources in self._plan.key_origins.items():
            if key not in framed_keys:
                deps |= sources
        # names outside the attribute environment are constants (enum
        # literals) or the in/self bindings handled separately
        self.dep_keys = tuple(sorted(deps & set(attrs)))

    @staticmethod
    def _receiver_sort(pat: MsgTerm, var_sorts, attrs, cls, env):
        r = pat.receiver
        if isinstance(r, NameTerm) and not r.primed:
            if r.name == "self":
                return cls
            if r.name in var_sorts:
                return var_sorts[r.name]
            if r.name in attrs:
                return attrs[r.name]
            return env.resolve_method_class(pat.name, len(pat.args))
        if isinstance(r, IdLit):
            return r.cls
        return None

    def step_formula(self):
        """The post block as a closed-under-binders formula."""
        return Quant("exists", self.post_binders, conj(*self.post_conjuncts))

    def fires(self, st_env: dict, u, budget: Budget) -> bool:
        # plans restore every binding they add, so st_env can be shared
        return self._pre_fn(st_env, u, budget)

    def successors(self, st_env: dict, u, budget: Budget) -> list:
        """All (outputs tuple, new valuation, witness binding) completions.

        In raw (frame-free) mode a primed attribute the postcondition
        never mentions is unconstrained: completions expand over its
        whole carrier.
        """
        out = []
        seen = set()
        for w in self._plan.witnesses(st_env, u, budget):
            seq = w["out"]
            valuation = {a: w[a + "'"] for a in self.attr_names if a + "'" in w}
            missing = [a for a in self.attr_names if a + "'" not in w]
            if missing and not self.framed:
                stack = [valuation]
                for a in missing:
                    stack = [dict(v, **{a: value})
                             for v in stack
                             for value in u.carrier(self.attr_sorts[a])]
                expansions = stack
            else:
                expansions = [valuation]
            for val in expansions:
                key = (seq, tuple(sorted(val.items(), key=lambda kv: kv[0])))
                if key in seen:
                    continue
                seen.add(key)
                out.append((seq, val, w))
        return out


class LifecycleExec:
    """Per-lifecycle cache of executable transitions."""

    def __init__(self, lc: LifecycleDoc, env: SignatureEnv, u,
                 framed: bool = True):
        self.lc = lc
        self.transitions = tuple(
            TransitionExec(lc, t, env, u, framed) for t in lc.transitions)
        self.by_dispatch: dict = {}
        for tx in self.transitions:
            ip = tx.transition.input_pattern
            method = None if ip is None else (ip.method, len(ip.vars))
            key = (tx.transition.source, method)
            self.by_dispatch.setdefault(key, []).append(tx)

    def from_state(self, control: str) -> tuple:
        return tuple(tx for tx in self.transitions
                     if tx.transition.source == control)

    def dispatch(self, control: str, msg) -> list:
        """Transitions from a control state whose input pattern matches
        the message's method (or the input-less ones for msg None)."""
        if msg is None:
            return self.by_dispatch.get((control, None), [])
        return self.by_dispatch.get((control, (msg.name, len(msg.args))), [])


_EXEC_CACHE: dict = {}


def lifecycle_exec(lc: LifecycleDoc, env: SignatureEnv, u,
                   framed: bool = True) -> LifecycleExec:
    key = (id(lc), id(env), id(u), framed)
    hit = _EXEC_CACHE.get(key)
    if hit is not None and hit.lc is lc:
        return hit
    ex = LifecycleExec(lc, env, u, framed)
    _EXEC_CACHE[key] = ex
    return ex


def object_step(lc: LifecycleDoc, st: ObjectState, input_msg, u,
                env: SignatureEnv, budget: Budget | None = None,
                framed: bool = True) -> list:
    """All successor steps of one object on one delivery.

    Returns a list of (outputs, new ObjectState, transition name,
    witness binding); empty means the input is unprocessable here.
    ``input_msg`` is a Message or None.
    """
    if budget is None:
        budget = Budget()
    ex = lifecycle_exec(lc, env, u, framed)
    st_env = dict(st.valuation)
    st_env["self"] = st.obj_id
    if input_msg is not None:
        st_env["in"] = input_msg.value()
    results = []
    for tx in ex.dispatch(st.control, input_msg):
        if not tx.fires(st_env, u, budget):
            continue
        for seq, valuation, witness in tx.successors(st_env, u, budget):
            new_val = dict(st.valuation)
            new_val.update(valuation)
            st2 = ObjectState(st.obj_id, new_val, tx.transition.target, ACTIVE)
            outputs = tuple(Message.from_value(m) for m in seq.msgs)
            results.append((outputs, st2, tx.transition.tname, witness))
    return results


# ---------------------------------------------------------------------------
# Medium
# ---------------------------------------------------------------------------

class CoinFlipPolicy:
    """Deliver each non-forced eligible head with fixed probability."""

    def __init__(self, p: float = 0.5):
        self.p = p

    def offer(self, rng) -> bool:
        return rng.random() < self.p


def eligible_heads(m: MediumState, tick: int) -> list:
    """Per-receiver delivery candidates for this tick.

    Returns [(receiver, forced, candidates)] in receiver order, where
    candidates are (queue key, head entry) sorted oldest first and
    ``forced`` is the entry whose age reached max_delay (oldest such),
    if any.  Only queue heads are candidates: per-pair FIFO.
    """
    by_receiver: dict = {}
    for key, entries in m.queues.items():
        if not entries:
            continue
        head = entries[0]
        if head.eligible_from > tick:
            continue
        by_receiver.setdefault(key[1], []).append((key, head))
    out = []
    for receiver in sorted(by_receiver, key=value_key):
        candidates = sorted(
            by_receiver[receiver],
            key=lambda pair: (pair[1].eligible_from, value_key(pair[0][0])))
        forced = None
        for key, head in candidates:
            if tick - head.eligible_from >= m.max_delay:
                forced = (key, head)
                break
        out.append((receiver, forced, candidates))
    return out


def take_entry(m: MediumState, key) -> QueuedMessage:
    entry = m.queues[key].pop(0)
    if not m.queues[key]:
        del m.queues[key]
    return entry


def medium_step(m: MediumState, tick: int, policy, rng):
    """Pick at most one delivery per receiver for this tick.

    A head whose age reached max_delay is forced; among several forced
    heads for one receiver the oldest goes first and the rest wait
    (at most one delivery per receiver per tick).  Younger heads are
    offered to the delay policy in oldest-first order.  Returns
    (deliveries, new MediumState) with deliveries in receiver order.
    """
    m2 = m.copy()
    deliveries = []
    for receiver, forced, candidates in eligible_heads(m2, tick):
        chosen = forced
        if chosen is None:
            for key, head in candidates:
                if policy.offer(rng):
                    chosen = (key, head)
                    break
        if chosen is None:
            continue
        take_entry(m2, chosen[0])
        deliveries.append(chosen[1])
    return deliveries, m2
