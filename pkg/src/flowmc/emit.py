"""Model emitters: TLA+ module + TLC config, nuXmv model, DOT rendering.

Both symbolic backends are fed from the same ``Sts``, so their action
inventories match by construction; ``scan_tla_structure`` and
``scan_nuxmv_structure`` parse the emitted text back into (source,
target, stack effect) triples so tests can confirm that.  Emitted files
carry a header comment with the toolkit version and a digest of the
source IR; ``normalize_emitted`` strips it for golden comparisons.

Integer division and modulus print as the backend's native operators,
whose rounding conventions differ from the evaluator's C-style
truncation; models meant for cross-checking should avoid them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .expr import (
    AnyVal,
    Binary,
    BoolLit,
    Domain,
    Expr,
    IntLit,
    TRUE,
    Unary,
    VarRef,
    conjuncts,
)
from .flowgraph import FlowGraph
from .sts import STACK_PADDING, Sts, StsAction


class EmitError(Exception):
    pass


class UnboundedDomainError(EmitError):
    pass


class CapacityTooSmallError(EmitError):
    pass


_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class EmitterOptions:
    module_name: Optional[str] = None
    source_digest: str = ""
    toolkit_version: str = ""

    def resolved_name(self, default: str) -> str:
        name = self.module_name or default
        if not _IDENT_RE.match(name):
            raise EmitError(f"module name {name!r} is not a valid identifier")
        return name


_TLA_RESERVED = frozenset(
    {
        "node", "stack_nodes", "stack_locals", "vars", "Init", "Next", "Spec",
        "LocalsSnapshot", "StackBound", "STACK_CAPACITY", "UNCHANGED", "Head",
        "Tail", "Len", "BOOLEAN", "TRUE", "FALSE",
    }
)
_SMV_RESERVED = frozenset(
    {
        "node", "depth", "stack_unchanged", "STACK_CAPACITY", STACK_PADDING,
        "MODULE", "main", "VAR", "IVAR", "FROZENVAR", "DEFINE", "CONSTANTS",
        "ASSIGN", "INIT", "TRANS", "INVAR", "SPEC", "LTLSPEC", "CTLSPEC",
        "next", "init", "case", "esac", "in", "union", "mod", "boolean",
        "integer", "word", "array", "of", "process", "self", "TRUE", "FALSE",
    }
)


def _check_names(sts: Sts, reserved: frozenset, backend: str) -> None:
    """Scalar names share a namespace with the emitted identifiers."""
    taken = set(reserved) | {a.name for a in sts.actions} | set(sts.node_values)
    for scalar in sts.scalar_names:
        if scalar in taken or scalar.startswith("st_") or scalar.startswith("Dom_"):
            raise EmitError(
                f"variable '{scalar}' collides with a reserved {backend} identifier"
            )


def _header(comment: str, opts: EmitterOptions) -> list[str]:
    from . import __version__

    version = opts.toolkit_version or __version__
    lines = [f"{comment} Generated by flowmc {version}"]
    if opts.source_digest:
        lines.append(f"{comment} source-ir sha256: {opts.source_digest}")
    return lines


def normalize_emitted(text: str) -> str:
    """Strip the leading header comment lines (``\\*``, ``--`` or ``//``)."""
    lines = text.splitlines()
    index = 0
    while index < len(lines) and lines[index].startswith(("\\*", "--", "//")):
        index += 1
    return "\n".join(lines[index:]) + "\n"


# ---------------------------------------------------------------------------
# Expression rendering


_TLA_OPS = {"&&": "/\\", "||": "\\/", "!": "~", "==": "=", "!=": "/=", "=>": "=>",
            "+": "+", "-": "-", "*": "*", "/": "\\div", "%": "%",
            "<": "<", "<=": "<=", ">": ">", ">=": ">="}
_SMV_OPS = {"&&": "&", "||": "|", "!": "!", "==": "=", "!=": "!=", "=>": "->",
            "+": "+", "-": "-", "*": "*", "/": "/", "%": "mod",
            "<": "<", "<=": "<=", ">": ">", ">=": ">="}


def _tla_domain(domain: Domain) -> str:
    if domain.kind == "bool":
        return "BOOLEAN"
    if domain.kind == "range":
        return f"{domain.lo}..{domain.hi}"
    raise UnboundedDomainError("the TLA+ backend requires finite domains")


def render_tla(expr: Expr) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, BoolLit):
        return "TRUE" if expr.value else "FALSE"
    if isinstance(expr, VarRef):
        return expr.name + ("'" if expr.primed else "")
    if isinstance(expr, Unary):
        return f"{_TLA_OPS[expr.op]}{_wrap(render_tla(expr.operand), expr.operand)}"
    if isinstance(expr, Binary):
        if isinstance(expr.right, AnyVal):
            if expr.op != "==":
                raise EmitError("any(...) only renders under equality")
            return f"{render_tla(expr.left)} \\in {_tla_domain(expr.right.domain)}"
        left = _wrap(render_tla(expr.left), expr.left)
        right = _wrap(render_tla(expr.right), expr.right)
        return f"{left} {_TLA_OPS[expr.op]} {right}"
    raise EmitError(f"cannot render {expr!r}")


def render_smv(expr: Expr) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, BoolLit):
        return "TRUE" if expr.value else "FALSE"
    if isinstance(expr, VarRef):
        return f"next({expr.name})" if expr.primed else expr.name
    if isinstance(expr, Unary):
        return f"{_SMV_OPS[expr.op]}{_wrap(render_smv(expr.operand), expr.operand)}"
    if isinstance(expr, Binary):
        if isinstance(expr.right, AnyVal):
            if expr.op != "==":
                raise EmitError("any(...) only renders under equality")
            lhs = render_smv(expr.left)
            domain = expr.right.domain
            if domain.kind == "bool":
                return f"({lhs} = TRUE | {lhs} = FALSE)"
            if domain.kind == "range":
                return f"({lhs} >= {domain.lo} & {lhs} <= {domain.hi})"
            return "TRUE"  # unbounded choice: the type already permits anything
        left = _wrap(render_smv(expr.left), expr.left)
        right = _wrap(render_smv(expr.right), expr.right)
        return f"{left} {_SMV_OPS[expr.op]} {right}"
    raise EmitError(f"cannot render {expr!r}")


def _wrap(text: str, expr: Expr) -> str:
    return f"({text})" if isinstance(expr, Binary) else text


# ---------------------------------------------------------------------------
# TLA+


def emit_tla(sts: Sts, opts: EmitterOptions = EmitterOptions()) -> tuple[str, str]:
    """Returns (module text, TLC config text); byte-deterministic."""
    name = opts.resolved_name(sts.module_name)
    _check_names(sts, _TLA_RESERVED, "TLA+")
    for scalar in sts.scalar_names:
        if not sts.domains[scalar].is_finite:
            raise UnboundedDomainError(
                f"variable '{scalar}' has an unbounded domain; TLC needs finite domains"
            )

    scalars = list(sts.scalar_names)
    all_vars = ["node", "stack_nodes", "stack_locals"] + scalars
    dom_constants = [f"Dom_{scalar}" for scalar in scalars]

    lines: list[str] = []
    lines += _header("\\*", opts)
    lines.append(f"---- MODULE {name} ----")
    lines.append("EXTENDS Integers, Sequences")
    lines.append("")
    lines.append("CONSTANTS " + ", ".join(["STACK_CAPACITY"] + dom_constants))
    lines.append("")
    lines.append("VARIABLES " + ", ".join(all_vars))
    lines.append("")
    lines.append("vars == <<" + ", ".join(all_vars) + ">>")
    lines.append("")
    snapshot = ", ".join(sts.locals_order)
    lines.append(f"LocalsSnapshot == <<{snapshot}>>")
    lines.append("")
    lines.append("StackBound == Len(stack_nodes) <= STACK_CAPACITY")
    lines.append("")

    init_conjuncts = [
        f'node = "{sts.init.node}"',
        "stack_nodes = <<>>",
        "stack_locals = <<>>",
    ]
    for decl in sts.globals_decls:
        init_conjuncts.append(f"{decl.name} \\in Dom_{decl.name}")
    if sts.init.globals_expr != TRUE:
        init_conjuncts.append(render_tla(sts.init.globals_expr))
    for local, value in sts.init.locals_values:
        init_conjuncts.append(f"{local} = {render_tla(_lit(value))}")
    lines.append("Init ==")
    lines += [f"  /\\ {part}" for part in init_conjuncts]
    lines.append("")

    for action in sts.actions:
        lines += _tla_action(sts, action)
        lines.append("")

    lines.append("Next == " + " \\/ ".join(a.name for a in sts.actions))
    lines.append("")
    lines.append("Spec == Init /\\ [][Next]_vars")
    lines.append("====")
    module = "\n".join(lines) + "\n"

    cfg_lines = ["SPECIFICATION Spec", "CONSTRAINT StackBound",
                 f"CONSTANT STACK_CAPACITY = {sts.stack_capacity}"]
    for scalar in scalars:
        domain = sts.domains[scalar]
        if domain.kind == "bool":
            values = "{TRUE, FALSE}"
        else:
            values = "{" + ", ".join(str(v) for v in domain.values()) + "}"
        cfg_lines.append(f"CONSTANT Dom_{scalar} = {values}")
    config = "\n".join(cfg_lines) + "\n"
    return module, config


def _lit(value) -> Expr:
    return BoolLit(value) if isinstance(value, bool) else IntLit(value)


def _tla_action(sts: Sts, action: StsAction) -> list[str]:
    parts: list[str] = []
    if not action.skip_source_test:
        parts.append(f'node = "{action.source}"')
    if action.kind == "silent":
        parts.append(f'node\' = "{action.target}"')
    elif action.kind == "call":
        parts.append(f'node\' = "{action.target}"')
        parts.append("Len(stack_nodes) < STACK_CAPACITY")
        parts.append(f'stack_nodes\' = <<"{action.push_node}">> \\o stack_nodes')
        parts.append("stack_locals' = <<LocalsSnapshot>> \\o stack_locals")
    else:
        parts.append("stack_nodes /= <<>>")
        parts.append("node' = Head(stack_nodes)")
        parts.append("stack_nodes' = Tail(stack_nodes)")
        for index, local in enumerate(sts.locals_order, start=1):
            parts.append(f"{local}' = Head(stack_locals)[{index}]")
        parts.append("stack_locals' = Tail(stack_locals)")
    for part in conjuncts(action.body.expr):
        if part == TRUE:
            continue
        parts.append(render_tla(part))
    for extra in sorted(action.extra_havoc):
        parts.append(f"{extra}' \\in Dom_{extra}")
    unchanged = []
    if action.kind == "silent":
        unchanged += ["stack_nodes", "stack_locals"]
    unchanged += [p for p in action.pinned]
    if unchanged:
        parts.append("UNCHANGED <<" + ", ".join(unchanged) + ">>")
    lines = [f"{action.name} =="]
    lines += [f"  /\\ {part}" for part in parts]
    return lines


# ---------------------------------------------------------------------------
# nuXmv


def static_call_depth(sts: Sts) -> Optional[int]:
    """Longest chain of pushes from main, or None when recursion makes it
    unbounded."""
    calls: dict[str, set[str]] = {}
    for action in sts.actions:
        if action.kind == "call":
            caller = sts.proc_of_node[action.source]
            calls.setdefault(caller, set()).add(action.callee)

    depths: dict[str, int] = {}
    visiting: set[str] = set()

    def depth_of(proc: str) -> Optional[int]:
        if proc in depths:
            return depths[proc]
        if proc in visiting:
            return None  # recursion: unbounded
        visiting.add(proc)
        best = 0
        for callee in sorted(calls.get(proc, ())):
            sub = depth_of(callee)
            if sub is None:
                return None
            best = max(best, 1 + sub)
        visiting.discard(proc)
        depths[proc] = best
        return best

    main = sts.proc_of_node[sts.init.node]
    return depth_of(main)


def emit_nuxmv(sts: Sts, opts: EmitterOptions = EmitterOptions()) -> str:
    """nuXmv model: enumerated node variable, the stack flattened into
    per-slot scalars plus a depth counter, one DEFINE per action, TRANS as
    their disjunction.  Byte-deterministic."""
    name = opts.resolved_name(sts.module_name)
    _check_names(sts, _SMV_RESERVED, "nuXmv")
    cap = sts.stack_capacity
    depth_needed = static_call_depth(sts)
    if depth_needed is not None and depth_needed > cap:
        raise CapacityTooSmallError(
            f"call depth {depth_needed} exceeds the stack capacity {cap}"
        )

    def smv_domain(domain: Domain) -> str:
        if domain.kind == "bool":
            return "boolean"
        if domain.kind == "range":
            return f"{domain.lo}..{domain.hi}"
        return "integer"

    def smv_value(value) -> str:
        if isinstance(value, bool):
            return "TRUE" if value else "FALSE"
        return str(value)

    node_enum = "{" + ", ".join(sts.node_values) + "}"
    slot_enum = "{" + ", ".join([STACK_PADDING] + list(sts.node_values)) + "}"
    init_local = dict(sts.init.locals_values)

    lines: list[str] = []
    lines += _header("--", opts)
    lines.append(f"-- module {name}")
    lines.append("MODULE main")
    lines.append("VAR")
    lines.append(f"  node : {node_enum};")
    lines.append(f"  depth : 0..{cap};")
    for i in range(cap):
        lines.append(f"  st_node_{i} : {slot_enum};")
    for local in sts.locals_order:
        for i in range(cap):
            lines.append(f"  st_{local}_{i} : {smv_domain(sts.domains[local])};")
    for scalar in sts.scalar_names:
        lines.append(f"  {scalar} : {smv_domain(sts.domains[scalar])};")
    lines.append("DEFINE")
    lines.append(f"  STACK_CAPACITY := {cap};")

    cells = [f"st_node_{i}" for i in range(cap)]
    cells += [f"st_{local}_{i}" for local in sts.locals_order for i in range(cap)]
    stack_same = " & ".join([f"next(depth) = depth"] + [f"next({c}) = {c}" for c in cells])
    lines.append(f"  stack_unchanged := {stack_same};")

    for action in sts.actions:
        lines.append(f"  {action.name} := {_smv_action(sts, action)};")

    init_parts = [f"node = {sts.init.node}", "depth = 0"]
    for i in range(cap):
        init_parts.append(f"st_node_{i} = {STACK_PADDING}")
    for local in sts.locals_order:
        for i in range(cap):
            init_parts.append(f"st_{local}_{i} = {smv_value(init_local[local])}")
    if sts.init.globals_expr != TRUE:
        init_parts.append(render_smv(sts.init.globals_expr))
    for local, value in sts.init.locals_values:
        init_parts.append(f"{local} = {smv_value(value)}")
    lines.append("INIT")
    lines.append("  " + " & ".join(init_parts) + ";")
    lines.append("TRANS")
    lines.append("  " + " | ".join(a.name for a in sts.actions) + ";")
    return "\n".join(lines) + "\n"


def _smv_action(sts: Sts, action: StsAction) -> str:
    cap = sts.stack_capacity

    def smv_value(value) -> str:
        if isinstance(value, bool):
            return "TRUE" if value else "FALSE"
        return str(value)

    parts: list[str] = []
    if not action.skip_source_test:
        parts.append(f"node = {action.source}")
    if action.kind == "silent":
        parts.append(f"next(node) = {action.target}")
        parts.append("stack_unchanged")
    elif action.kind == "call":
        parts.append(f"next(node) = {action.target}")
        parts.append("depth < STACK_CAPACITY")
        parts.append("next(depth) = depth + 1")
        for i in range(cap):
            parts.append(
                f"next(st_node_{i}) = (case depth = {i} : {action.push_node}; "
                f"TRUE : st_node_{i}; esac)"
            )
        for local in sts.locals_order:
            for i in range(cap):
                parts.append(
                    f"next(st_{local}_{i}) = (case depth = {i} : {local}; "
                    f"TRUE : st_{local}_{i}; esac)"
                )
    else:
        init_local = dict(sts.init.locals_values)
        parts.append("depth > 0")
        parts.append("next(depth) = depth - 1")
        branches = "".join(f"depth = {i + 1} : st_node_{i}; " for i in range(cap))
        parts.append(f"next(node) = (case {branches}TRUE : node; esac)")
        for local in sts.locals_order:
            branches = "".join(f"depth = {i + 1} : st_{local}_{i}; " for i in range(cap))
            parts.append(f"next({local}) = (case {branches}TRUE : {local}; esac)")
        for i in range(cap):
            parts.append(
                f"next(st_node_{i}) = (case depth = {i + 1} : {STACK_PADDING}; "
                f"TRUE : st_node_{i}; esac)"
            )
        for local in sts.locals_order:
            for i in range(cap):
                parts.append(
                    f"next(st_{local}_{i}) = (case depth = {i + 1} : {smv_value(init_local[local])}; "
                    f"TRUE : st_{local}_{i}; esac)"
                )
    for part in conjuncts(action.body.expr):
        if part == TRUE:
            continue
        parts.append(render_smv(part))
    for extra in sorted(action.extra_havoc):
        domain = sts.domains[extra]
        if domain.kind == "bool":
            parts.append(f"(next({extra}) = TRUE | next({extra}) = FALSE)")
        elif domain.kind == "range":
            parts.append(f"(next({extra}) >= {domain.lo} & next({extra}) <= {domain.hi})")
    for pin in action.pinned:
        parts.append(f"next({pin}) = {pin}")
    return " & ".join(parts)


# ---------------------------------------------------------------------------
# DOT


def emit_dot(fg: FlowGraph, opts: EmitterOptions = EmitterOptions()) -> str:
    """One cluster per procedure; entry nodes drawn with a thick border,
    return nodes with double peripheries; call edges labelled."""
    name = opts.resolved_name(fg.name)
    lines: list[str] = []
    lines += _header("//", opts)
    lines.append(f"digraph {name} {{")
    lines.append("  rankdir=TB;")
    lines.append('  node [shape=box, fontname="monospace"];')
    for proc in fg.procedures.values():
        lines.append(f"  subgraph cluster_{proc.name} {{")
        lines.append(f'    label="{proc.name}";')
        for node in proc.nodes:
            attrs = [f'label="{node}\\n{proc.actions[node]}"']
            if node == proc.entry:
                attrs.append("penwidth=2")
            if node == proc.return_node:
                attrs.append("peripheries=2")
            lines.append(f'    "{node}" [{", ".join(attrs)}];')
        for edge in proc.edges:
            if edge.label is None:
                lines.append(f'    "{edge.src}" -> "{edge.dst}";')
            else:
                lines.append(f'    "{edge.src}" -> "{edge.dst}" [label="{edge.label}"];')
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Structural scanners (parity checks between the two backends)


def scan_tla_structure(text: str) -> dict[str, tuple[str, Optional[str], str, Optional[str]]]:
    """Action name -> (source, target, stack effect, pushed node)."""
    text = normalize_emitted(text)
    next_match = re.search(r"^Next == (.+)$", text, re.M)
    if not next_match:
        raise EmitError("no Next definition found")
    names = [n.strip() for n in next_match.group(1).split("\\/")]
    out = {}
    for name in names:
        block = re.search(rf"^{re.escape(name)} ==\n((?:  /\\ .*\n)+)", text, re.M)
        if not block:
            raise EmitError(f"no definition found for action {name!r}")
        body = block.group(1)
        source = re.search(r'node = "([^"]+)"', body)
        target = re.search(r"node' = \"([^\"]+)\"", body)
        pushed = re.search(r"stack_nodes' = <<\"([^\"]+)\">> \\o stack_nodes", body)
        if pushed:
            effect = "push"
        elif "Tail(stack_nodes)" in body:
            effect = "pop"
        else:
            effect = "none"
        out[name] = (
            source.group(1) if source else "*",
            target.group(1) if target else None,
            effect,
            pushed.group(1) if pushed else None,
        )
    return out


def scan_nuxmv_structure(text: str) -> dict[str, tuple[str, Optional[str], str, Optional[str]]]:
    """Same shape as :func:`scan_tla_structure`, from the nuXmv text."""
    text = normalize_emitted(text)
    trans_match = re.search(r"^TRANS\n  (.+);$", text, re.M)
    if not trans_match:
        raise EmitError("no TRANS section found")
    names = [n.strip() for n in trans_match.group(1).split("|")]
    out = {}
    for name in names:
        define = re.search(rf"^  {re.escape(name)} := (.*);$", text, re.M)
        if not define:
            raise EmitError(f"no define found for action {name!r}")
        body = define.group(1)
        source = re.search(r"(?<!next\()\bnode = (\w+)", body)
        target = re.search(r"next\(node\) = (\w+)(?! ?=)", body)
        if "next(depth) = depth + 1" in body:
            effect = "push"
            pushed_match = re.search(r"next\(st_node_0\) = \(case depth = 0 : (\w+);", body)
            pushed = pushed_match.group(1) if pushed_match else None
            target_name = target.group(1) if target else None
        elif "next(depth) = depth - 1" in body:
            effect = "pop"
            pushed = None
            target_name = None  # dynamic: restored from the stack
        else:
            effect = "none"
            pushed = None
            target_name = target.group(1) if target else None
        out[name] = (source.group(1) if source else "*", target_name, effect, pushed)
    return out


# ---------------------------------------------------------------------------
# Grammar smoke checks


_TLA_KEYWORDS = {
    "MODULE", "EXTENDS", "CONSTANTS", "VARIABLES", "UNCHANGED", "Head", "Tail",
    "Len", "Integers", "Sequences", "TRUE", "FALSE", "BOOLEAN", "SPECIFICATION",
    "CONSTRAINT", "CONSTANT",
}
_SMV_KEYWORDS = {
    "MODULE", "main", "VAR", "DEFINE", "INIT", "TRANS", "next", "case", "esac",
    "TRUE", "FALSE", "boolean", "integer", "mod",
}


def _check_balance(text: str, pairs: list[tuple[str, str]], label: str) -> None:
    for open_tok, close_tok in pairs:
        if text.count(open_tok) != text.count(close_tok):
            raise EmitError(f"unbalanced {open_tok!r}/{close_tok!r} in {label} output")


def check_tla_text(text: str) -> None:
    """Balanced delimiters, declared-before-used names, prime discipline."""
    body = normalize_emitted(text)
    _check_balance(body, [("(", ")"), ("<<", ">>"), ("{", "}")], "TLA+")
    if "next(" in body:
        raise EmitError("TLA+ output must not use next(...)")
    declared: set[str] = set(_TLA_KEYWORDS)
    for line in body.splitlines():
        module = re.match(r"^-+ MODULE (\w+) -+$", line)
        if module:
            declared.add(module.group(1))
            continue
        header = re.match(r"^(CONSTANTS|VARIABLES) (.+)$", line)
        if header:
            declared.update(n.strip() for n in header.group(2).split(","))
            continue
        definition = re.match(r"^(\w+) ==", line)
        if definition:
            declared.add(definition.group(1))
        scrubbed = re.sub(r"\\[A-Za-z]+", " ", re.sub(r'"[^"]*"', "", line))
        for ident in re.findall(r"[A-Za-z][A-Za-z0-9_]*", scrubbed):
            if ident not in declared and not ident.isdigit():
                raise EmitError(f"identifier {ident!r} used before declaration")
    for match in re.finditer(r"(\w+)'", body):
        if match.group(1) not in declared:
            raise EmitError(f"prime applied to undeclared {match.group(1)!r}")


def check_nuxmv_text(text: str) -> None:
    """Balanced delimiters, declared-before-used names, next() discipline."""
    body = normalize_emitted(text)
    _check_balance(body, [("(", ")"), ("{", "}")], "nuXmv")
    if body.count("case") != body.count("esac"):
        raise EmitError("unbalanced case/esac in nuXmv output")
    if "'" in body:
        raise EmitError("nuXmv output must not use primes")
    declared: set[str] = set(_SMV_KEYWORDS)
    for line in body.splitlines():
        var_decl = re.match(r"^  (\w+) : (.+);$", line)
        if var_decl:
            declared.add(var_decl.group(1))
            for value in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", var_decl.group(2)):
                declared.add(value)  # enum literals
            continue
        define = re.match(r"^  (\w+) := ", line)
        if define:
            # rhs may reference the name being defined only afterwards
            for ident in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", line.split(":=", 1)[1]):
                if ident not in declared and not ident.isdigit():
                    raise EmitError(f"identifier {ident!r} used before declaration")
            declared.add(define.group(1))
            continue
        for ident in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", line):
            if ident not in declared and not ident.isdigit():
                raise EmitError(f"identifier {ident!r} used before declaration")
    for match in re.finditer(r"next\((\w+)\)", body):
        if match.group(1) not in declared:
            raise EmitError(f"next() applied to undeclared {match.group(1)!r}")
