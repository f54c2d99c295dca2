"""Shared symbolic-transition-system form behind the TLA+ and nuXmv backends.

The system has a node variable, a bounded stack, and one flat scalar per
global and per procedure local (name-mangled ``<proc>__<var>``).  Next is
the disjunction of named actions, one per flow-graph edge kind: silent
edges keep the stack, call edges push the continuation node together with
a snapshot of all locals, and return actions pop and restore.  Because a
pop restores every local from the snapshot, inactive procedures' locals
always hold canonical values, which makes reachable system states
correspond one-to-one with reachable pushdown configurations; the
interpreter here is the oracle that checks exactly that.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, replace
from typing import Mapping, Optional

from .actions import Action, literal
from .expr import (
    AnyVal,
    Binary,
    Domain,
    Expr,
    TRUE,
    Unary,
    Value,
    VarRef,
    conj,
    conjuncts,
    eval_expr,
    free_vars,
    map_vars,
)
from .flowgraph import FlowGraph
from .ir import VarDecl
from .pds import (
    Configuration,
    InducedPds,
    StackFrame,
    freeze_env,
    successors as pds_successors,
)


class StsError(Exception):
    pass


class BoundMismatchError(StsError):
    pass


STACK_PADDING = "stk_none"


def mangle(proc: str, var: str) -> str:
    return f"{proc}__{var}"


@dataclass(frozen=True)
class StsVar:
    name: str
    kind: str  # "node" | "stack" | "scalar"
    domain: Optional[Domain] = None


@dataclass(frozen=True)
class StsAction:
    """One disjunct of the next-state relation.

    ``body`` is the scalar part (the node label plus, for calls, the
    callee's local initialization); the node test, node update and the
    single push/pop macro occurrence are kept structurally.
    """

    name: str
    kind: str  # "silent" | "call" | "return"
    source: str
    target: Optional[str]  # None for return actions (target comes from the pop)
    body: Action
    pinned: tuple[str, ...]
    push_node: Optional[str] = None
    callee: Optional[str] = None
    skip_source_test: bool = False
    extra_havoc: frozenset[str] = frozenset()


@dataclass(frozen=True)
class InitSpec:
    node: str
    globals_expr: Expr
    locals_values: tuple[tuple[str, Value], ...]  # mangled name -> initial value


@dataclass(frozen=True)
class Sts:
    module_name: str
    node_values: tuple[str, ...]
    proc_of_node: dict[str, str]
    globals_decls: tuple[VarDecl, ...]
    locals_order: tuple[str, ...]  # mangled local names, declaration order
    proc_locals: dict[str, tuple[tuple[str, str], ...]]  # proc -> ((local, mangled), ...)
    domains: dict[str, Domain]  # every scalar
    init: InitSpec
    actions: tuple[StsAction, ...]
    stack_capacity: int

    @property
    def scalar_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.globals_decls) + self.locals_order

    @property
    def variables(self) -> tuple[StsVar, ...]:
        out = [StsVar("node", "node"), StsVar("stack", "stack")]
        for name in self.scalar_names:
            out.append(StsVar(name, "scalar", self.domains[name]))
        return tuple(out)


# ---------------------------------------------------------------------------
# Building the STS from a flow graph


def _strip_node(node: str) -> str:
    return node[2:] if node.startswith("n_") else node


def _mangle_expr(expr: Expr, local_names: set[str], proc: str) -> Expr:
    def rewrite(ref):
        if isinstance(ref, VarRef) and ref.name in local_names:
            return VarRef(mangle(proc, ref.name), ref.primed)
        return ref

    return map_vars(expr, rewrite)


def _is_identity_conjunct(part: Expr) -> bool:
    return (
        isinstance(part, Binary)
        and part.op == "=="
        and isinstance(part.left, VarRef)
        and part.left.primed
        and isinstance(part.right, VarRef)
        and not part.right.primed
        and part.left.name == part.right.name
    )


def _is_havoc_conjunct(part: Expr) -> bool:
    return (
        isinstance(part, Binary)
        and part.op == "=="
        and isinstance(part.left, VarRef)
        and part.left.primed
        and isinstance(part.right, AnyVal)
    )


def sts_of_flow_graph(fg: FlowGraph, stack_capacity: int = 10) -> Sts:
    """One action per flow-graph edge kind; Init pins the entry node, the
    initial locals of every procedure, an empty stack, and the initial
    global constraint."""
    if stack_capacity < 1:
        raise StsError("stack capacity must be at least 1")

    node_values: list[str] = []
    locals_order: list[str] = []
    proc_locals: dict[str, tuple[tuple[str, str], ...]] = {}
    domains: dict[str, Domain] = {d.name: d.domain for d in fg.globals}
    for proc in fg.procedures.values():
        node_values.extend(proc.nodes)
        pairs = []
        for decl in proc.locals:
            mangled = mangle(proc.name, decl.name)
            if mangled in domains:
                raise StsError(f"mangled name '{mangled}' collides with another variable")
            locals_order.append(mangled)
            domains[mangled] = decl.domain
            pairs.append((decl.name, mangled))
        proc_locals[proc.name] = tuple(pairs)

    actions: list[StsAction] = []
    scalar_names = tuple(d.name for d in fg.globals) + tuple(locals_order)

    def pins_for(writes: frozenset[str], restored: frozenset[str]) -> tuple[str, ...]:
        return tuple(n for n in scalar_names if n not in writes and n not in restored)

    for proc in fg.procedures.values():
        local_names = {d.name for d in proc.locals}
        mangled_locals = {mangle(proc.name, n) for n in local_names}
        call_counts: dict[tuple[str, str], int] = {}
        for edge in proc.edges:
            if edge.label is not None:
                key = (edge.src, edge.label)
                call_counts[key] = call_counts.get(key, 0) + 1

        def lift(node: str) -> Expr:
            return _mangle_expr(proc.actions[node].expr, local_names, proc.name)

        for edge in proc.edges:
            body_expr = lift(edge.src)
            if edge.label is None:
                if edge.src == edge.dst and edge.src == proc.return_node and proc.name == fg.main:
                    name = f"{_strip_node(edge.src)}_stutter"
                else:
                    name = f"{_strip_node(edge.src)}_to_{_strip_node(edge.dst)}"
                body = Action(body_expr)
                actions.append(
                    StsAction(
                        name=name,
                        kind="silent",
                        source=edge.src,
                        target=edge.dst,
                        body=body,
                        pinned=pins_for(body.writes, frozenset()),
                    )
                )
            else:
                callee = fg.procedures[edge.label]
                for part in conjuncts(body_expr):
                    _, primed, _ = free_vars(part)
                    touched = primed & mangled_locals
                    if touched and not _is_identity_conjunct(part):
                        raise StsError(
                            f"call source '{edge.src}' must not constrain its locals"
                        )
                parts = [body_expr]
                for decl in callee.locals:
                    parts.append(
                        Binary(
                            "==",
                            VarRef(mangle(callee.name, decl.name), True),
                            literal(callee.init_locals[decl.name]),
                        )
                    )
                body = Action(conj(parts))
                call_name = f"{_strip_node(edge.src)}_call_{edge.label}"
                if call_counts[(edge.src, edge.label)] > 1:
                    call_name += f"_{_strip_node(edge.dst)}"
                actions.append(
                    StsAction(
                        name=call_name,
                        kind="call",
                        source=edge.src,
                        target=callee.entry,
                        body=body,
                        pinned=pins_for(body.writes, frozenset()),
                        push_node=edge.dst,
                        callee=edge.label,
                    )
                )
        if proc.name != fg.main:
            ret = proc.return_node
            kept: list[Expr] = []
            for part in conjuncts(lift(ret)):
                _, primed, _ = free_vars(part)
                touched = primed & mangled_locals
                if not touched:
                    kept.append(part)
                    continue
                if primed - mangled_locals:
                    raise StsError(
                        f"return label of '{proc.name}' couples locals with globals"
                    )
                # the popped frame overrides the callee's post-locals; only
                # always-satisfiable constraints on them may be dropped
                if not (_is_identity_conjunct(part) or _is_havoc_conjunct(part)):
                    raise StsError(
                        f"return label of '{proc.name}' constrains its locals"
                    )
            body = Action(conj(kept))
            actions.append(
                StsAction(
                    name=f"{_strip_node(ret)}_return",
                    kind="return",
                    source=ret,
                    target=None,
                    body=body,
                    pinned=pins_for(body.writes, frozenset(locals_order)),
                )
            )

    names = [a.name for a in actions]
    if len(set(names)) != len(names):
        raise StsError("duplicate action names")

    main = fg.procedures[fg.main]
    init_locals: list[tuple[str, Value]] = []
    for proc in fg.procedures.values():
        for decl in proc.locals:
            init_locals.append((mangle(proc.name, decl.name), proc.init_locals[decl.name]))

    proc_of_node = fg.proc_of_node()
    return Sts(
        module_name=fg.name,
        node_values=tuple(node_values),
        proc_of_node=proc_of_node,
        globals_decls=fg.globals,
        locals_order=tuple(locals_order),
        proc_locals=proc_locals,
        domains=domains,
        init=InitSpec(main.entry, fg.init_globals, tuple(init_locals)),
        actions=tuple(actions),
        stack_capacity=stack_capacity,
    )


# ---------------------------------------------------------------------------
# Explicit interpretation


Slot = tuple[str, tuple[Value, ...]]  # (return node, snapshot of all locals)


@dataclass(frozen=True)
class StsState:
    node: str
    stack: tuple[Slot, ...]
    scalars: tuple[tuple[str, Value], ...]

    def env(self) -> dict[str, Value]:
        return dict(self.scalars)


@dataclass
class StsReport:
    states: list[StsState]
    deadlocks: list[tuple[StsState, str]]
    truncated: bool


def _enumerate_bodies(
    expr: Expr,
    written: list[str],
    pre: Mapping[str, Value],
    domains: Mapping[str, Domain],
) -> list[dict[str, Value]]:
    for name in written:
        if not domains[name].is_finite:
            raise StsError(f"variable '{name}' has an unbounded domain")
    out = []
    spaces = [list(domains[name].values()) for name in written]
    for combo in itertools.product(*spaces):
        candidate = dict(pre)
        candidate.update(zip(written, combo))
        if bool(eval_expr(expr, pre, candidate)):
            out.append(candidate)
    return out


def sts_initial_states(sts: Sts) -> list[StsState]:
    spaces = []
    names = []
    for decl in sts.globals_decls:
        if not decl.domain.is_finite:
            raise StsError(f"global '{decl.name}' has an unbounded domain")
        names.append(decl.name)
        spaces.append(list(decl.domain.values()))
    out: list[StsState] = []
    locals_env = dict(sts.init.locals_values)
    for combo in itertools.product(*spaces):
        env = dict(zip(names, combo))
        if bool(eval_expr(sts.init.globals_expr, env)):
            scalars = freeze_env({**env, **locals_env})
            out.append(StsState(sts.init.node, (), scalars))
    return out


def sts_successors(sts: Sts, state: StsState) -> tuple[list[StsState], bool]:
    """Successor states plus a flag: was some call blocked only by capacity."""
    out: list[StsState] = []
    seen: set[StsState] = set()
    overflow_blocked = False
    pre = state.env()

    def emit(new: StsState) -> None:
        if new not in seen:
            seen.add(new)
            out.append(new)

    for action in sts.actions:
        if not action.skip_source_test and state.node != action.source:
            continue
        written = sorted(action.body.writes | action.extra_havoc)
        if action.kind == "silent":
            for env in _enumerate_bodies(action.body.expr, written, pre, sts.domains):
                emit(StsState(action.target, state.stack, freeze_env(env)))
        elif action.kind == "call":
            if len(state.stack) + 1 > sts.stack_capacity:
                overflow_blocked = True
                continue
            slot: Slot = (
                action.push_node,
                tuple(pre[name] for name in sts.locals_order),
            )
            for env in _enumerate_bodies(action.body.expr, written, pre, sts.domains):
                emit(StsState(action.target, (slot,) + state.stack, freeze_env(env)))
        else:  # return
            if not state.stack:
                continue
            slot_node, snapshot = state.stack[0]
            for env in _enumerate_bodies(action.body.expr, written, pre, sts.domains):
                restored = dict(env)
                restored.update(zip(sts.locals_order, snapshot))
                emit(StsState(slot_node, state.stack[1:], freeze_env(restored)))
    return out, overflow_blocked


def execute_sts(sts: Sts, max_steps: int = 100_000) -> StsReport:
    """BFS over system states; a state with no successors is a deadlock,
    annotated with whether a stack-capacity overflow caused it."""
    states: dict[StsState, None] = {}
    deadlocks: list[tuple[StsState, str]] = []
    queue: deque[StsState] = deque()
    for state in sts_initial_states(sts):
        if state not in states:
            states[state] = None
            queue.append(state)
    truncated = False
    expansions = 0
    while queue:
        if expansions >= max_steps:
            truncated = True
            break
        state = queue.popleft()
        expansions += 1
        succ, overflow = sts_successors(sts, state)
        if not succ:
            deadlocks.append((state, "stack-overflow" if overflow else "no-enabled-action"))
        for nxt in succ:
            if nxt not in states:
                states[nxt] = None
                queue.append(nxt)
    return StsReport(list(states), deadlocks, truncated)


# ---------------------------------------------------------------------------
# Equivalence with the induced PDS


@dataclass
class EquivalenceVerdict:
    equivalent: bool
    reason: str = ""
    witness: str = ""

    def __bool__(self) -> bool:
        return self.equivalent


def project_state(sts: Sts, state: StsState) -> Configuration:
    """Map a system state to the pushdown configuration it encodes."""
    env = state.env()
    global_env = {d.name: env[d.name] for d in sts.globals_decls}

    def frame_for(node: str, values: Mapping[str, Value]) -> StackFrame:
        proc = sts.proc_of_node[node]
        local_env = {local: values[mangled] for local, mangled in sts.proc_locals[proc]}
        return StackFrame(node, freeze_env(local_env))

    frames = [frame_for(state.node, env)]
    for slot_node, snapshot in state.stack:
        slot_env = dict(zip(sts.locals_order, snapshot))
        frames.append(frame_for(slot_node, slot_env))
    return Configuration(freeze_env(global_env), tuple(frames))


def compare_with_pds(
    sts: Sts,
    pds: InducedPds,
    max_steps: int = 100_000,
    max_stack: int = 16,
) -> EquivalenceVerdict:
    """Exhaustively check that reachable system states and reachable
    configurations correspond one-to-one and step together."""
    if max_stack > sts.stack_capacity:
        raise BoundMismatchError(
            f"max_stack {max_stack} exceeds the stack capacity {sts.stack_capacity}"
        )

    from .pds import explore, format_config

    pds_report = explore(pds, max_steps=max_steps, max_stack=max_stack)
    sts_report = execute_sts(sts, max_steps=max_steps)

    def depth_ok_sts(state: StsState) -> bool:
        return len(state.stack) + 1 <= max_stack

    sts_states = [s for s in sts_report.states if depth_ok_sts(s)]
    projection: dict[StsState, Configuration] = {s: project_state(sts, s) for s in sts_states}

    by_config: dict[Configuration, StsState] = {}
    for state, config in projection.items():
        if config in by_config:
            return EquivalenceVerdict(
                False,
                "projection is not injective",
                format_config(config),
            )
        by_config[config] = state

    pds_configs = {c for c in pds_report.visited if c.depth <= max_stack}
    sts_configs = set(by_config)
    only_pds = pds_configs - sts_configs
    if only_pds:
        witness = min(only_pds, key=format_config)
        return EquivalenceVerdict(False, "configuration unreachable in the STS", format_config(witness))
    only_sts = sts_configs - pds_configs
    if only_sts:
        witness = min(only_sts, key=format_config)
        return EquivalenceVerdict(False, "STS state has no reachable configuration", format_config(witness))

    # initial states must coincide
    init_sts = {project_state(sts, s) for s in sts_initial_states(sts)}
    init_pds = set(pds.initial)
    if init_sts != init_pds:
        diff = init_sts ^ init_pds
        witness = min(diff, key=format_config)
        return EquivalenceVerdict(False, "initial states differ", format_config(witness))

    # the step relations must agree through the projection
    for state in sts_states:
        config = projection[state]
        succ_sts_raw, _ = sts_successors(sts, state)
        succ_sts = {
            project_state(sts, s) for s in succ_sts_raw if depth_ok_sts(s)
        }
        succ_pds = {c for c in pds_successors(pds, config) if c.depth <= max_stack}
        if succ_sts != succ_pds:
            diff = succ_sts ^ succ_pds
            witness = min(diff, key=format_config) if diff else config
            return EquivalenceVerdict(
                False,
                f"step relations differ at {format_config(config)}",
                format_config(witness),
            )
    return EquivalenceVerdict(True, "reachable states and steps coincide")


# ---------------------------------------------------------------------------
# Mutations (translation self-tests)


MUTATIONS = ("negate-guard", "drop-frame", "swap-push", "drop-return-test", "wrong-init")


def _replace_action(sts: Sts, index: int, action: StsAction) -> Sts:
    actions = list(sts.actions)
    actions[index] = action
    return replace(sts, actions=tuple(actions))


def mutate_sts(sts: Sts, kind: str) -> Sts:
    """Apply a named fault; used to confirm the cross-check catches it."""
    if kind == "negate-guard":
        for i, action in enumerate(sts.actions):
            for j, part in enumerate(conjuncts(action.body.expr)):
                _, primed, _ = free_vars(part)
                if primed or part == TRUE:
                    continue
                parts = conjuncts(action.body.expr)
                parts[j] = Unary("!", part)
                body = Action(conj(parts))
                return _replace_action(sts, i, replace(action, body=body))
        raise StsError("no guard conjunct to negate")
    if kind == "drop-frame":
        for i, action in enumerate(sts.actions):
            if action.pinned:
                victim = action.pinned[0]
                return _replace_action(
                    sts,
                    i,
                    replace(
                        action,
                        pinned=action.pinned[1:],
                        extra_havoc=action.extra_havoc | {victim},
                    ),
                )
        raise StsError("no frame conjunct to drop")
    if kind == "swap-push":
        for i, action in enumerate(sts.actions):
            if action.kind == "call":
                return _replace_action(sts, i, replace(action, push_node=action.target))
        raise StsError("no call action to mutate")
    if kind == "drop-return-test":
        for i, action in enumerate(sts.actions):
            if action.kind == "return":
                return _replace_action(sts, i, replace(action, skip_source_test=True))
        raise StsError("no return action to mutate")
    if kind == "wrong-init":
        init = replace(sts.init, globals_expr=Unary("!", sts.init.globals_expr))
        return replace(sts, init=init)
    raise StsError(f"unknown mutation {kind!r}")
