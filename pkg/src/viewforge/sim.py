"""Closed-system simulation: tick loop, traces, trace validation.

Each tick: stimuli due now are enqueued, the medium picks at most one
delivery per receiver (forced once a message's age reaches the delay
bound), each receiving object fires one enabled step, emissions join
the medium for the next tick.  Intra-tick order is fixed (receivers in
identifier order, emissions in firing order) so a (documents, scenario,
seed) triple determines the trace bit for bit.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .checker import (
    FAIL, PASS, ConditionReport, render_binding, render_system_config,
)
from .errors import (
    CapExceeded, IdPoolExhausted, ScenarioError, SimulationError,
)
from .logic import Budget, eval_term
from .parser import parse_scenario_text
from .project import DocumentSet
from .system_model import (
    ACTIVE, DORMANT, CoinFlipPolicy, MediumState, Message, ObjectState,
    QueuedMessage, SystemConfig, eligible_heads, lifecycle_exec, medium_step,
    object_step, take_entry,
)
from .values import EXTERNAL, ObjectId, is_external, render_value, value_key

RANDOM = "random"
EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class Scenario:
    name: str
    horizon: int
    seed: int
    max_delay: int
    drop_on_stall: bool
    initial_objects: tuple  # of (ObjectId, control state, valuation dict)
    stimuli: tuple          # of (tick, Message)


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    kind: str  # EMIT | DELIVER | FIRE | CREATE | STALL
    obj: object = None
    entry: QueuedMessage = None
    tname: str = None
    binding: dict = None
    valuation_before: dict = None
    dropped: bool = False

    def render(self) -> str:
        t = f"[{self.tick}]"
        if self.kind in ("EMIT", "DELIVER"):
            return (f"{t} {self.kind} uid={self.entry.uid} "
                    f"msg={render_value(self.entry.msg.value())}")
        if self.kind == "FIRE":
            return (f"{t} FIRE obj={render_value(self.obj)} "
                    f"transition={self.tname} "
                    f"binding={render_binding(self.binding)}")
        if self.kind == "CREATE":
            return f"{t} CREATE obj={render_value(self.obj)}"
        if self.kind == "STALL":
            tail = " dropped" if self.dropped else ""
            return (f"{t} STALL obj={render_value(self.obj)} "
                    f"uid={self.entry.uid}{tail}")
        raise ValueError(self.kind)


@dataclass
class Trace:
    scenario: Scenario
    mode: str
    seed: int | None
    events: list
    final: SystemConfig
    ds: DocumentSet = field(repr=False, default=None)

    def render(self) -> str:
        seed = "-" if self.seed is None else str(self.seed)
        lines = [
            "# viewforge trace",
            f"scenario {self.scenario.name} mode={self.mode} seed={seed} "
            f"horizon={self.scenario.horizon} "
            f"max_delay={self.scenario.max_delay}",
        ]
        lines.extend(e.render() for e in self.events)
        lines.append("final:")
        lines.append(render_system_config(self.final).rstrip("\n"))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Scenario loading
# ---------------------------------------------------------------------------

def load_scenario(path: str | Path, ds: DocumentSet) -> Scenario:
    return resolve_scenario(parse_scenario_text(Path(path).read_text()), ds)


def resolve_scenario(raw: dict, ds: DocumentSet) -> Scenario:
    """Resolve parsed value terms against the project and validate."""
    u = ds.universe()
    env = ds.signature_env()
    if raw["horizon"] is None or raw["horizon"] < 1:
        raise ScenarioError("scenario needs horizon >= 1")

    objects = []
    for cls, index, state, assigns in raw["objects"]:
        oid = u.object_id(cls, index)
        lc = ds.lifecycle_for(cls)
        if lc is None:
            raise ScenarioError(f"class {cls!r} has no lifecycle document")
        if state not in lc.initial_states:
            raise ScenarioError(
                f"{render_value(oid)}: {state!r} is not an initial state")
        attrs = env.attrs(cls)
        valuation = {}
        for name, term in assigns:
            if name not in attrs:
                raise ScenarioError(
                    f"{render_value(oid)}: unknown attribute {name!r}")
            valuation[name] = eval_term(term, {}, u)
        missing = sorted(set(attrs) - set(valuation))
        if missing:
            raise ScenarioError(
                f"{render_value(oid)}: valuation misses attributes {missing}")
        from .logic import evaluate
        if not evaluate(lc.state_formula(state), valuation, u):
            raise ScenarioError(
                f"{render_value(oid)}: valuation violates the predicate of "
                f"initial state {state!r}")
        objects.append((oid, state, valuation))

    stimuli = []
    for tick, cls, index, method, terms in raw["stimuli"]:
        if tick > raw["horizon"]:
            raise ScenarioError(f"stimulus tick {tick} beyond horizon")
        oid = u.object_id(cls, index)
        sig = env.find_method(cls, method, len(terms))
        if sig is None:
            raise ScenarioError(
                f"stimulus {method}/{len(terms)} is not a method of {cls!r}")
        args = tuple(eval_term(t, {}, u) for t in terms)
        for value, (_, sort) in zip(args, sig.params):
            if value not in u.carrier_set(sort):
                raise ScenarioError(
                    f"stimulus argument {render_value(value)} outside "
                    f"sort {sort!r}")
        stimuli.append((tick, Message(EXTERNAL, oid, method, args)))

    return Scenario(raw["name"], raw["horizon"], raw["seed"],
                    raw["max_delay"], raw["drop_on_stall"],
                    tuple(objects), tuple(stimuli))


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

@dataclass
class _Firing:
    state: ObjectState
    outputs: tuple
    tname: str
    binding: dict
    created: bool = False


class _Runner:
    def __init__(self, ds: DocumentSet, sc: Scenario):
        self.ds = ds
        self.sc = sc
        self.u = ds.universe()
        self.env = ds.signature_env()
        self.budget = Budget(cap=10_000_000_000)
        for lc in ds.lifecycles():
            for t in lc.transitions:
                if t.input_pattern is None:
                    raise SimulationError(
                        f"transition {t.tname!r} of {lc.name!r} has no input "
                        f"pattern; spontaneous transitions are not executable")
            lifecycle_exec(lc, self.env, self.u)

    def initial_config(self) -> SystemConfig:
        objects = {}
        for cls in sorted(self.u.id_pools):
            attrs = self.env.attrs(cls)
            defaults = {a: self.u.carrier(s)[0] for a, s in attrs.items()}
            for oid in self.u.id_pools[cls]:
                objects[oid] = ObjectState(oid, dict(defaults), None, DORMANT)
        for oid, control, valuation in self.sc.initial_objects:
            objects[oid] = ObjectState(oid, dict(valuation), control, ACTIVE)
        return SystemConfig(objects, MediumState(self.sc.max_delay), 0)

    # -- shared tick pieces ---------------------------------------------------

    def inject_stimuli(self, config, tick, uid, events):
        for stick, msg in self.sc.stimuli:
            if stick != tick:
                continue
            entry = QueuedMessage(msg, uid, tick)
            uid += 1
            config.medium.enqueue(entry)
            events.append(TraceEvent(tick, "EMIT", entry=entry))
        return uid

    def _pending_create_targets(self, config) -> set:
        return {e.msg.receiver for entries in config.medium.queues.values()
                for e in entries if e.msg.name == "create"}

    def _next_create_target(self, config, cls, allocated) -> ObjectId | None:
        pending = self._pending_create_targets(config)
        for oid in self.u.id_pools[cls]:
            if oid in allocated or oid in pending:
                continue
            if config.objects[oid].liveness == DORMANT:
                return oid
        return None

    def _creates_valid(self, config, outputs) -> bool:
        """Reject candidates whose create emissions miss the allocation
        discipline: each create targets the next free dormant identifier."""
        allocated: list = []
        for msg in outputs:
            if msg.name != "create" or is_external(msg.receiver):
                continue
            expected = self._next_create_target(
                config, msg.receiver.cls, allocated)
            if expected is None:
                raise IdPoolExhausted(
                    f"identifier pool of class {msg.receiver.cls!r} "
                    f"exhausted")
            if msg.receiver != expected:
                return False
            allocated.append(expected)
        return True

    def delivery_options(self, config, entry) -> list:
        """All firings the receiver can choose from for this delivery."""
        msg = entry.msg
        st = config.objects[msg.receiver]
        options: list = []
        if st.liveness == DORMANT:
            if msg.name != "create":
                return []
            lc = self.ds.lifecycle_for(msg.receiver.cls)
            if lc is None:
                return []
            for sname in sorted(lc.initial_states):
                probe = ObjectState(st.obj_id, dict(st.valuation), sname,
                                    ACTIVE)
                for outputs, st2, tname, w in object_step(
                        lc, probe, msg, self.u, self.env, self.budget):
                    if self._creates_valid(config, outputs):
                        options.append(_Firing(st2, outputs, tname, w, True))
            return options
        lc = self.ds.lifecycle_for(msg.receiver.cls)
        if lc is None:
            return []
        for outputs, st2, tname, w in object_step(
                lc, st, msg, self.u, self.env, self.budget):
            if self._creates_valid(config, outputs):
                options.append(_Firing(st2, outputs, tname, w, False))
        return options

    def apply_delivery(self, config, entry, firing, tick, uid, events):
        """Record one chosen firing (or a stall when firing is None)."""
        msg = entry.msg
        if firing is None:
            events.append(TraceEvent(tick, "STALL", obj=msg.receiver,
                                     entry=entry,
                                     dropped=self.sc.drop_on_stall))
            if not self.sc.drop_on_stall:
                config.medium.requeue_front(entry)
            return uid
        events.append(TraceEvent(tick, "DELIVER", entry=entry))
        before = dict(config.objects[msg.receiver].valuation)
        if firing.created:
            events.append(TraceEvent(tick, "CREATE", obj=msg.receiver))
        events.append(TraceEvent(
            tick, "FIRE", obj=msg.receiver, tname=firing.tname,
            binding=firing.binding, valuation_before=before))
        config.objects[msg.receiver] = firing.state
        for out in firing.outputs:
            oentry = QueuedMessage(out, uid, tick + 1)
            uid += 1
            config.medium.enqueue(oentry)
            events.append(TraceEvent(tick, "EMIT", entry=oentry))
        return uid

    # -- random mode ----------------------------------------------------------

    def run_random(self, seed: int) -> Trace:
        rng = random.Random(seed)
        policy = CoinFlipPolicy()
        config = self.initial_config()
        events: list = []
        uid = 0
        for tick in range(self.sc.horizon):
            config.clock = tick
            uid = self.inject_stimuli(config, tick, uid, events)
            deliveries, medium2 = medium_step(
                config.medium, tick, policy, rng)
            config.medium = medium2
            for entry in deliveries:
                if is_external(entry.msg.receiver):
                    events.append(TraceEvent(tick, "DELIVER", entry=entry))
                    continue
                options = self.delivery_options(config, entry)
                if not options:
                    uid = self.apply_delivery(config, entry, None, tick, uid,
                                              events)
                    continue
                pick = options[0] if len(options) == 1 \
                    else options[rng.randrange(len(options))]
                uid = self.apply_delivery(config, entry, pick, tick, uid,
                                          events)
        config.clock = self.sc.horizon
        return Trace(self.sc, RANDOM, seed, events, config, self.ds)

    # -- exhaustive mode --------------------------------------------------------

    def run_exhaustive(self, cap: int) -> list:
        traces: dict = {}
        explored = [0]

        def spend():
            explored[0] += 1
            if explored[0] > cap:
                raise CapExceeded(
                    f"exhaustive exploration cap {cap} exceeded")

        def tick_choices(medium, tick):
            """All per-tick delivery selections: list of entry-key lists."""
            groups = []
            for receiver, forced, candidates in eligible_heads(medium, tick):
                if forced is not None:
                    groups.append([forced])
                else:
                    groups.append([None] + candidates)
            combos = [[]]
            for group in groups:
                combos = [c + [g] for c in combos for g in group]
            return combos

        def advance(config, tick, uid, events):
            spend()
            if tick == self.sc.horizon:
                config.clock = self.sc.horizon
                tr = Trace(self.sc, EXHAUSTIVE, None, events, config, self.ds)
                traces.setdefault(tr.render(), tr)
                return
            config.clock = tick
            uid2 = self.inject_stimuli(config, tick, uid, events)
            for combo in tick_choices(config.medium, tick):
                chosen = [c for c in combo if c is not None]
                base = config.copy()
                for key, _entry in chosen:
                    take_entry(base.medium, key)
                entries = [entry for _, entry in chosen]
                process(base, entries, 0, tick, uid2, list(events))

        def process(config, entries, i, tick, uid, events):
            if i == len(entries):
                advance(config, tick + 1, uid, events)
                return
            entry = entries[i]
            if is_external(entry.msg.receiver):
                events2 = events + [TraceEvent(tick, "DELIVER", entry=entry)]
                process(config, entries, i + 1, tick, uid, events2)
                return
            options = self.delivery_options(config, entry)
            if not options:
                cfg2 = config.copy()
                ev2 = list(events)
                uid2 = self.apply_delivery(cfg2, entry, None, tick, uid, ev2)
                process(cfg2, entries, i + 1, tick, uid2, ev2)
                return
            for firing in options:
                spend()
                cfg2 = config.copy()
                ev2 = list(events)
                uid2 = self.apply_delivery(cfg2, entry, firing, tick, uid, ev2)
                process(cfg2, entries, i + 1, tick, uid2, ev2)

        advance(self.initial_config(), 0, 0, [])
        return [traces[key] for key in sorted(traces)]


def simulate(ds: DocumentSet, sc: Scenario, mode: str = RANDOM,
             seed: int | None = None):
    """Run a scenario; one Trace (random) or all traces (exhaustive)."""
    runner = _Runner(ds, sc)
    if mode == RANDOM:
        return runner.run_random(sc.seed if seed is None else seed)
    if mode == EXHAUSTIVE:
        return runner.run_exhaustive(ds.exhaustive_cap)
    raise SimulationError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Trace validation
# ---------------------------------------------------------------------------

def check_trace(tr: Trace) -> ConditionReport:
    """Validate the five medium/stepping properties of a finished trace:
    conservation, per-pair FIFO, bounded delay, post-state legality and
    prefix causality (the last only for seed-driven traces)."""
    report = ConditionReport()
    emitted: dict = {}
    delivered: dict = {}
    for e in tr.events:
        if e.kind == "EMIT":
            emitted[e.entry.uid] = e
        elif e.kind == "DELIVER":
            delivered.setdefault(e.entry.uid, []).append(e)

    queued = {entry.uid for entry in tr.final.medium.queued()}
    problems = []
    for uid, evs in delivered.items():
        if uid not in emitted:
            problems.append(f"uid {uid} delivered but never emitted")
        if len(evs) > 1:
            problems.append(f"uid {uid} delivered {len(evs)} times")
        if uid in queued:
            problems.append(f"uid {uid} both delivered and queued")
    dropped = {e.entry.uid for e in tr.events
               if e.kind == "STALL" and e.dropped}
    for uid in emitted:
        if uid not in delivered and uid not in queued and uid not in dropped:
            problems.append(f"uid {uid} lost")
    report.add("trace:conservation", FAIL if problems else PASS, "trace",
               None, "; ".join(problems))

    fifo_problems = []
    last_uid: dict = {}
    for e in tr.events:
        if e.kind != "DELIVER":
            continue
        key = (e.entry.msg.sender, e.entry.msg.receiver)
        if key in last_uid and e.entry.uid < last_uid[key]:
            fifo_problems.append(
                f"uid {e.entry.uid} overtook uid {last_uid[key]} on "
                f"{render_value(key[0])}->{render_value(key[1])}")
        last_uid[key] = e.entry.uid
    report.add("trace:fifo", FAIL if fifo_problems else PASS, "trace", None,
               "; ".join(fifo_problems))

    delay_problems = []
    for e in tr.events:
        if e.kind != "DELIVER":
            continue
        age = e.tick - e.entry.eligible_from
        if age < 0 or age > tr.scenario.max_delay:
            delay_problems.append(
                f"uid {e.entry.uid} delivered at age {age}")
    report.add("trace:bounded-delay", FAIL if delay_problems else PASS,
               "trace", None, "; ".join(delay_problems))

    report.add(*_check_fire_events(tr))

    if tr.seed is not None and tr.ds is not None:
        k = tr.scenario.horizon // 2
        truncated = Scenario(
            tr.scenario.name, tr.scenario.horizon, tr.scenario.seed,
            tr.scenario.max_delay, tr.scenario.drop_on_stall,
            tr.scenario.initial_objects,
            tuple((t, m) for t, m in tr.scenario.stimuli if t <= k))
        retr = simulate(tr.ds, truncated, RANDOM, tr.seed)
        want = [e.render() for e in tr.events if e.tick <= k]
        got = [e.render() for e in retr.events if e.tick <= k]
        report.add("trace:causality", PASS if want == got else FAIL, "trace",
                   None, f"prefix through tick {k}")
    return report


def _check_fire_events(tr: Trace):
    from .logic import compile_formula
    from .formulas import conj
    if tr.ds is None:
        return ("trace:post-state", PASS, "trace", None, "no project attached")
    u = tr.ds.universe()
    env = tr.ds.signature_env()
    budget = Budget(cap=10_000_000_000)
    problems = []
    pending_input: dict = {}
    for e in tr.events:
        if e.kind == "DELIVER":
            pending_input[e.entry.msg.receiver] = e.entry.msg
        if e.kind != "FIRE":
            continue
        lc = tr.ds.lifecycle_for(e.obj.cls)
        ex = lifecycle_exec(lc, env, u)
        tx = next(t for t in ex.transitions if t.transition.tname == e.tname)
        st_env = dict(e.valuation_before)
        st_env["self"] = e.obj
        msg = pending_input.get(e.obj)
        if msg is not None:
            st_env["in"] = msg.value()
        if not tx.fires(st_env, u, budget):
            problems.append(f"{e.render()}: precondition does not hold")
            continue
        # pattern variables the witness search never had to read are
        # reconstructible from the delivered message
        ip = tx.transition.input_pattern
        if ip is not None and msg is not None:
            st_env.setdefault(ip.sender_var, msg.sender)
            for var, val in zip(ip.vars, msg.args):
                st_env.setdefault(var, val)
        st_env.update(e.binding)
        ok = compile_formula(conj(*tx.post_conjuncts))(st_env, u, budget)
        if not ok:
            problems.append(f"{e.render()}: binding violates postcondition")
    verdict = FAIL if problems else PASS
    return ("trace:post-state", verdict, "trace", None, "; ".join(problems))
