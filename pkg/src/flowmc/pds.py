"""Operational semantics: the pushdown system induced by a flow graph.

Global states are the control states; the stack holds (node, local state)
pairs.  Successor computation follows the three rewrite-rule families:
silent edges rewrite the top frame, call edges push the continuation
frame under a fresh callee frame, and the return node of a non-main
procedure pops after executing its label.  Rewrite rules are generated
lazily from the flow graph; a brute-force materialization used as a test
oracle lives in the test suite.

Runs are infinite by definition, so a configuration without successors
is a modelling defect (an unsatisfiable label or a totality hole) and is
reported as a deadlock rather than silently truncating traces.
"""

from __future__ import annotations

import itertools
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .actions import Action, InfiniteDomainError, State, enumerate_posts
from .expr import Domain, Expr, Value, eval_expr, free_vars
from .flowgraph import FlowGraph


class PdsError(Exception):
    pass


class UnsatisfiableInitError(PdsError):
    pass


class NonGlobalVariableError(PdsError):
    pass


class NoInitialConfigurationError(PdsError):
    pass


class MalformedConfigurationError(PdsError):
    pass


Env = tuple[tuple[str, Value], ...]


def freeze_env(env: Mapping[str, Value]) -> Env:
    return tuple(sorted(env.items()))


@dataclass(frozen=True)
class StackFrame:
    node: str
    locals: Env

    def locals_dict(self) -> dict[str, Value]:
        return dict(self.locals)


@dataclass(frozen=True)
class Configuration:
    """Global state plus the stack, top frame first.  Always nonempty for
    reachable configurations: main never pops its final frame."""

    globals: Env
    stack: tuple[StackFrame, ...]

    def globals_dict(self) -> dict[str, Value]:
        return dict(self.globals)

    @property
    def top(self) -> StackFrame:
        return self.stack[0]

    @property
    def depth(self) -> int:
        return len(self.stack)


@dataclass(frozen=True)
class Trace:
    configurations: tuple[Configuration, ...]
    complete: bool

    @property
    def state_run(self) -> list[dict[str, Value]]:
        return [c.globals_dict() for c in self.configurations]


@dataclass
class ExploreReport:
    visited: list[Configuration]
    deadlocks: list[Configuration]
    truncated: bool
    max_stack_depth: int

    @property
    def visited_count(self) -> int:
        return len(self.visited)


@dataclass
class Verdict:
    holds: bool
    truncated: bool
    trace: Optional[Trace] = None


def _enumerate_assignments(decls, constraint: Expr) -> list[Env]:
    """All valuations of the declared variables satisfying the constraint."""
    names = [d.name for d in decls]
    spaces = []
    for decl in decls:
        if not decl.domain.is_finite:
            raise InfiniteDomainError(
                f"variable '{decl.name}' has an unbounded domain"
            )
        spaces.append(list(decl.domain.values()))
    out: list[Env] = []
    for combo in itertools.product(*spaces):
        env = dict(zip(names, combo))
        if bool(eval_expr(constraint, env)):
            out.append(freeze_env(env))
    return out


@dataclass
class InducedPds:
    """The induced pushdown system; rewrite rules are computed on demand."""

    flow_graph: FlowGraph
    initial: list[Configuration]
    _proc_of_node: dict[str, str] = field(default_factory=dict)
    _domains: dict[str, dict[str, Domain]] = field(default_factory=dict)

    def proc_of(self, node: str) -> str:
        try:
            return self._proc_of_node[node]
        except KeyError:
            raise MalformedConfigurationError(f"unknown node '{node}'") from None

    def frame_domains(self, proc: str) -> dict[str, Domain]:
        return self._domains[proc]

    def action_of(self, node: str) -> Action:
        return self.flow_graph.procedures[self.proc_of(node)].actions[node]


def induce(fg: FlowGraph) -> InducedPds:
    """Build the induced PDS: one initial configuration per satisfying
    initial global assignment, each with a single frame at main's entry."""
    global_domains = fg.global_domains()
    try:
        assignments = _enumerate_assignments(fg.globals, fg.init_globals)
    except Exception as err:
        if isinstance(err, InfiniteDomainError):
            raise
        raise PdsError(f"bad init constraint: {err}") from err
    if not assignments:
        raise UnsatisfiableInitError("no global assignment satisfies the init constraint")

    main = fg.procedures[fg.main]
    init_frame = StackFrame(main.entry, freeze_env(main.init_locals))
    initial = [Configuration(g, (init_frame,)) for g in assignments]

    proc_of_node = fg.proc_of_node()
    domains = {
        p.name: {**global_domains, **{d.name: d.domain for d in p.locals}}
        for p in fg.procedures.values()
    }
    # every written variable must be finitely enumerable
    for proc in fg.procedures.values():
        frame = domains[proc.name]
        for node, action in proc.actions.items():
            for name in action.writes:
                dom = frame.get(name)
                if dom is None:
                    raise PdsError(f"node '{node}' writes undeclared variable '{name}'")
                if not dom.is_finite:
                    raise InfiniteDomainError(
                        f"node '{node}' writes unbounded variable '{name}'"
                    )
    return InducedPds(fg, initial, proc_of_node, domains)


def successors(pds: InducedPds, config: Configuration) -> list[Configuration]:
    """Immediate successors, deterministically ordered."""
    fg = pds.flow_graph
    top = config.top
    proc_name = pds.proc_of(top.node)
    proc = fg.procedures[proc_name]
    local_names = {d.name for d in proc.locals}
    if set(top.locals_dict()) != local_names:
        raise MalformedConfigurationError(
            f"frame at '{top.node}' does not carry the locals of '{proc_name}'"
        )

    pre = State(top.locals, config.globals)
    posts = enumerate_posts(pds.action_of(top.node), pre, pds.frame_domains(proc_name))

    out: list[Configuration] = []
    seen: set[tuple] = set()

    def push(c: Configuration) -> None:
        key = (c.globals, c.stack)
        if key not in seen:
            seen.add(key)
            out.append(c)

    edges = sorted(
        (e for e in proc.edges if e.src == top.node),
        key=lambda e: (e.dst, e.label or ""),
    )
    for edge in edges:
        for post in posts:
            if edge.label is None:
                frame = StackFrame(edge.dst, post.locals)
                push(Configuration(post.globals, (frame,) + config.stack[1:]))
            else:
                callee = fg.procedures[edge.label]
                callee_frame = StackFrame(callee.entry, freeze_env(callee.init_locals))
                saved = StackFrame(edge.dst, post.locals)
                push(Configuration(post.globals, (callee_frame, saved) + config.stack[1:]))
    if top.node == proc.return_node and proc_name != fg.main and len(config.stack) > 1:
        for post in posts:
            push(Configuration(post.globals, config.stack[1:]))
    return out


def explore(pds: InducedPds, max_steps: int = 100_000, max_stack: int = 64) -> ExploreReport:
    """BFS closure of the initial configurations, bounded by an expansion
    budget and a stack-depth cap."""
    if max_steps < 1 or max_stack < 1:
        raise PdsError("bounds must be at least 1")
    visited: dict[Configuration, None] = {}
    queue: deque[Configuration] = deque()
    truncated = False
    deadlocks: list[Configuration] = []
    max_depth = 0
    for config in pds.initial:
        if config not in visited:
            visited[config] = None
            queue.append(config)
    expansions = 0
    while queue:
        if expansions >= max_steps:
            truncated = True
            break
        config = queue.popleft()
        expansions += 1
        max_depth = max(max_depth, config.depth)
        succ = successors(pds, config)
        if not succ:
            deadlocks.append(config)
        for nxt in succ:
            if nxt.depth > max_stack:
                truncated = True
                continue
            if nxt not in visited:
                visited[nxt] = None
                queue.append(nxt)
    return ExploreReport(list(visited), deadlocks, truncated, max_depth)


def check_invariant(
    pds: InducedPds,
    phi: Expr,
    max_steps: int = 100_000,
    max_stack: int = 64,
) -> Verdict:
    """Check that every reachable global state satisfies ``phi``; on failure
    the verdict carries a minimal-length trace (BFS order)."""
    global_names = {d.name for d in pds.flow_graph.globals}
    unprimed, primed, old = free_vars(phi)
    if primed or old or not unprimed <= global_names:
        bad = sorted((unprimed - global_names) | primed | old)
        raise NonGlobalVariableError(
            f"invariant must be over unprimed globals; offending: {', '.join(bad)}"
        )

    parents: dict[Configuration, Optional[Configuration]] = {}
    queue: deque[Configuration] = deque()

    def violating(config: Configuration) -> bool:
        return not bool(eval_expr(phi, config.globals_dict()))

    def trace_to(config: Configuration) -> Trace:
        chain = [config]
        while parents[chain[-1]] is not None:
            chain.append(parents[chain[-1]])
        return Trace(tuple(reversed(chain)), complete=True)

    for config in pds.initial:
        if config not in parents:
            parents[config] = None
            queue.append(config)
            if violating(config):
                return Verdict(False, False, trace_to(config))
    truncated = False
    expansions = 0
    while queue:
        if expansions >= max_steps:
            truncated = True
            break
        config = queue.popleft()
        expansions += 1
        for nxt in successors(pds, config):
            if nxt.depth > max_stack:
                truncated = True
                continue
            if nxt not in parents:
                parents[nxt] = config
                if violating(nxt):
                    return Verdict(False, False, trace_to(nxt))
                queue.append(nxt)
    return Verdict(True, truncated, None)


def sample_run(pds: InducedPds, length: int, seed: int = 0) -> Trace:
    """Sample a prefix of a run: a seeded pseudo-random walk.

    Runs are infinite, so successors that are immediate dead ends are
    avoided whenever a continuable successor exists; the walk stops early
    only when every continuation deadlocks.
    """
    if length < 1:
        raise PdsError("length must be at least 1")
    if not pds.initial:
        raise NoInitialConfigurationError("the induced PDS has no initial configuration")
    rng = random.Random(seed)
    current = pds.initial[rng.randrange(len(pds.initial))]
    configs = [current]
    while len(configs) < length:
        succ = successors(pds, current)
        if not succ:
            return Trace(tuple(configs), complete=False)
        alive = [s for s in succ if successors(pds, s)]
        pool = alive or succ
        current = pool[rng.randrange(len(pool))]
        configs.append(current)
    return Trace(tuple(configs), complete=True)


# ---------------------------------------------------------------------------
# Trace serialization


def _env_str(env: Iterable[tuple[str, Value]]) -> str:
    parts = []
    for name, value in env:
        if isinstance(value, bool):
            parts.append(f"{name}={'true' if value else 'false'}")
        else:
            parts.append(f"{name}={value}")
    return " ".join(parts)


def format_config(config: Configuration) -> str:
    frames = []
    for frame in config.stack:
        inner = _env_str(frame.locals)
        frames.append(f"({frame.node}{' ' + inner if inner else ''})")
    return f"{_env_str(config.globals)} | {' '.join(frames)}"


def format_trace(trace: Trace) -> str:
    lines = [
        f"{step} | {format_config(config)}"
        for step, config in enumerate(trace.configurations)
    ]
    return "\n".join(lines)
