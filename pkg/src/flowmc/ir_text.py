"""Textual program-IR format (``.apg``): parsing and serialization.

The format is line oriented; ``#`` starts a comment.  Section headers are
``program``, ``global``, ``init``, ``main``, ``procedure``, ``local``,
``block``, ``point``, ``edge``, ``entry``, ``exit``.  The full grammar is
documented in docs/ir-format.md and frozen by golden-file tests.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .expr import (
    Domain,
    Expr,
    ExprSyntaxError,
    TRUE,
    Value,
    parse_expr,
    to_str,
)
from .ir import (
    AnnotatedBlock,
    AnnotatedProcedure,
    AnnotatedProgram,
    Assign,
    Call,
    Contract,
    Diagnostic,
    Jump,
    Return,
    Skip,
    Statement,
    VarDecl,
    validate_program,
)

RESERVED_WORDS = frozenset(
    {
        "program", "global", "init", "procedure", "local", "block",
        "point", "edge", "entry", "exit", "contract", "requires", "ensures",
        "assigns", "when", "jump", "call", "return", "skip", "true", "false",
        "old", "any", "int", "bool",
    }
)

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass
class ParseResult:
    """Outcome of :func:`parse_program`.

    ``program`` is None when the text was not structurally parseable.  The
    diagnostics list collects both syntax findings and, when a program
    could be built, the structural validation findings.
    """

    program: Optional[AnnotatedProgram]
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.program is not None and not self.diagnostics


def _is_ident(text: str) -> bool:
    return bool(_IDENT_RE.match(text)) and text not in RESERVED_WORDS


# ---------------------------------------------------------------------------
# Parsing


@dataclass
class _BlockAcc:
    name: str
    contract: Contract
    points: list[str] = field(default_factory=list)
    stmts: dict[str, Statement] = field(default_factory=dict)
    edges: list[tuple[str, str]] = field(default_factory=list)
    guards: dict[tuple[str, str], Expr] = field(default_factory=dict)
    entry: Optional[str] = None
    exit: Optional[str] = None


@dataclass
class _ProcAcc:
    name: str
    locals: list[VarDecl] = field(default_factory=list)
    init_locals: dict[str, Value] = field(default_factory=dict)
    blocks: dict[str, _BlockAcc] = field(default_factory=dict)
    entry_block: Optional[str] = None


class _ProgramParser:
    def __init__(self, text: str) -> None:
        self.lines = text.splitlines()
        self.diagnostics: list[Diagnostic] = []
        self.name: Optional[str] = None
        self.main: Optional[str] = None
        self.globals: list[VarDecl] = []
        self.global_names: set[str] = set()
        self.init_globals: Expr = TRUE
        self.procs: dict[str, _ProcAcc] = {}
        self.cur_proc: Optional[_ProcAcc] = None
        self.cur_block: Optional[_BlockAcc] = None
        self.fatal = False

    def error(self, code: str, message: str, line_no: int, col: int = 0) -> None:
        self.diagnostics.append(Diagnostic(code, message, self._where(), line_no, col))

    def _where(self) -> str:
        parts = []
        if self.cur_proc is not None:
            parts.append(f"procedure {self.cur_proc.name}")
        if self.cur_block is not None:
            parts.append(f"block {self.cur_block.name}")
        return "/".join(parts)

    # -- small helpers -----------------------------------------------------

    def parse_domain(self, text: str, line_no: int) -> Optional[Domain]:
        text = text.strip()
        if text == "bool":
            return Domain("bool")
        if text == "int":
            return Domain("int")
        m = re.match(r"^int\s+(-?\d+)\s*\.\.\s*(-?\d+)$", text)
        if m:
            return Domain("range", int(m.group(1)), int(m.group(2)))
        self.error("SyntaxError", f"bad domain {text!r}", line_no)
        return None

    def parse_value(self, text: str, line_no: int) -> Optional[Value]:
        text = text.strip()
        if text == "true":
            return True
        if text == "false":
            return False
        try:
            return int(text)
        except ValueError:
            self.error("SyntaxError", f"bad value {text!r}", line_no)
            return None

    def parse_bexpr(self, text: str, line_no: int, *, allow_old: bool = False) -> Optional[Expr]:
        try:
            return parse_expr(text, allow_old=allow_old)
        except ExprSyntaxError as err:
            self.error("SyntaxError", str(err), line_no, err.pos)
            return None

    def take_ident(self, text: str, line_no: int, what: str) -> Optional[str]:
        text = text.strip()
        if not _is_ident(text):
            self.error("SyntaxError", f"bad {what} name {text!r}", line_no)
            return None
        return text

    # -- statement and contract sub-parsers ---------------------------------

    def parse_statement(self, text: str, line_no: int) -> Optional[Statement]:
        text = text.strip()
        if text == "return":
            return Return()
        if text == "skip":
            return Skip()
        if text.startswith("jump "):
            target = self.take_ident(text[5:], line_no, "block")
            return Jump(target) if target else None
        if text.startswith("call "):
            target = self.take_ident(text[5:], line_no, "procedure")
            return Call(target) if target else None
        if ":=" in text:
            target_text, expr_text = text.split(":=", 1)
            target = self.take_ident(target_text, line_no, "variable")
            if target is None:
                return None
            expr = self.parse_bexpr(expr_text, line_no)
            return Assign(target, expr) if expr is not None else None
        self.error("SyntaxError", f"bad statement {text!r}", line_no)
        return None

    def parse_contract(self, text: str, line_no: int) -> Optional[Contract]:
        # split on the clause keywords appearing as whole words
        pieces = re.split(r"\b(requires|ensures|assigns)\b", " " + text + " ")
        if pieces[0].strip():
            self.error("SyntaxError", f"unexpected {pieces[0].strip()!r} in contract", line_no)
            return None
        clauses: dict[str, str] = {}
        for i in range(1, len(pieces), 2):
            keyword = pieces[i]
            if keyword in clauses:
                self.error("SyntaxError", f"duplicate {keyword!r} clause", line_no)
                return None
            clauses[keyword] = pieces[i + 1].strip()
        requires = TRUE
        ensures = TRUE
        assigns: tuple[str, ...] = ()
        if "requires" in clauses:
            expr = self.parse_bexpr(clauses["requires"], line_no)
            if expr is None:
                return None
            requires = expr
        if "ensures" in clauses:
            expr = self.parse_bexpr(clauses["ensures"], line_no, allow_old=True)
            if expr is None:
                return None
            ensures = expr
        if "assigns" in clauses:
            names = []
            text_names = clauses["assigns"].strip()
            if text_names:
                for raw in text_names.split(","):
                    name = self.take_ident(raw, line_no, "variable")
                    if name is None:
                        return None
                    names.append(name)
            if len(set(names)) != len(names):
                self.error("DuplicateName", "variable repeated in assigns", line_no)
                return None
            assigns = tuple(names)
        return Contract(kind="spec", requires=requires, ensures=ensures, assigns=assigns)

    # -- line handlers -------------------------------------------------------

    def run(self) -> ParseResult:
        for idx, raw in enumerate(self.lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            keyword, _, rest = line.partition(" ")
            handler = getattr(self, f"_on_{keyword}", None)
            if handler is None:
                self.error("SyntaxError", f"unknown directive {keyword!r}", idx)
                self.fatal = True
                continue
            handler(rest.strip(), idx)

        program = self._finish()
        if program is None:
            return ParseResult(None, self.diagnostics)
        diags = self.diagnostics + validate_program(program)
        return ParseResult(program, diags)

    def _on_program(self, rest: str, line_no: int) -> None:
        if self.name is not None:
            self.error("SyntaxError", "duplicate 'program' directive", line_no)
            return
        self.name = self.take_ident(rest, line_no, "program")

    def _on_main(self, rest: str, line_no: int) -> None:
        self.main = self.take_ident(rest, line_no, "procedure")

    def _on_global(self, rest: str, line_no: int) -> None:
        if self.cur_proc is not None:
            self.error("SyntaxError", "'global' must appear before procedures", line_no)
            return
        name_text, sep, domain_text = rest.partition(":")
        name = self.take_ident(name_text, line_no, "variable")
        if name is None or not sep:
            self.error("SyntaxError", "expected 'global <var> : <domain>'", line_no)
            return
        domain = self.parse_domain(domain_text, line_no)
        if domain is None:
            return
        if name in self.global_names:
            self.error("DuplicateName", f"global '{name}' declared twice", line_no)
            return
        self.global_names.add(name)
        self.globals.append(VarDecl(name, domain))

    def _on_init(self, rest: str, line_no: int) -> None:
        expr = self.parse_bexpr(rest, line_no)
        if expr is not None:
            self.init_globals = expr

    def _on_procedure(self, rest: str, line_no: int) -> None:
        name = self.take_ident(rest, line_no, "procedure")
        self.cur_block = None
        if name is None:
            self.cur_proc = None
            self.fatal = True
            return
        if name in self.procs:
            self.error("DuplicateName", f"procedure '{name}' declared twice", line_no)
            self.cur_proc = None
            return
        self.cur_proc = _ProcAcc(name)
        self.procs[name] = self.cur_proc

    def _on_local(self, rest: str, line_no: int) -> None:
        if self.cur_proc is None:
            self.error("SyntaxError", "'local' outside a procedure", line_no)
            return
        decl_text, sep, value_text = rest.partition("=")
        name_text, colon, domain_text = decl_text.partition(":")
        name = self.take_ident(name_text, line_no, "variable")
        if name is None or not colon or not sep:
            self.error("SyntaxError", "expected 'local <var> : <domain> = <value>'", line_no)
            return
        domain = self.parse_domain(domain_text, line_no)
        value = self.parse_value(value_text, line_no)
        if domain is None or value is None:
            return
        if any(d.name == name for d in self.cur_proc.locals):
            self.error("DuplicateName", f"local '{name}' declared twice", line_no)
            return
        self.cur_proc.locals.append(VarDecl(name, domain))
        self.cur_proc.init_locals[name] = value

    def _on_block(self, rest: str, line_no: int) -> None:
        if self.cur_proc is None:
            self.error("SyntaxError", "'block' outside a procedure", line_no)
            self.fatal = True
            return
        name_text, _, contract_text = rest.partition(" ")
        name = self.take_ident(name_text, line_no, "block")
        if name is None:
            self.cur_block = None
            self.fatal = True
            return
        contract = Contract.empty()
        contract_text = contract_text.strip()
        if contract_text:
            if not contract_text.startswith("contract"):
                self.error("SyntaxError", f"unexpected {contract_text!r} after block name", line_no)
                self.cur_block = None
                return
            parsed = self.parse_contract(contract_text[len("contract"):], line_no)
            if parsed is None:
                self.cur_block = None
                return
            contract = parsed
        if name in self.cur_proc.blocks:
            self.error("DuplicateName", f"block '{name}' declared twice", line_no)
            self.cur_block = None
            return
        self.cur_block = _BlockAcc(name, contract)
        self.cur_proc.blocks[name] = self.cur_block
        if self.cur_proc.entry_block is None:
            self.cur_proc.entry_block = name

    def _on_point(self, rest: str, line_no: int) -> None:
        if self.cur_block is None:
            self.error("SyntaxError", "'point' outside a block", line_no)
            return
        name_text, sep, stmt_text = rest.partition(":")
        name = self.take_ident(name_text, line_no, "point")
        if name is None or not sep:
            self.error("SyntaxError", "expected 'point <id> : <stmt>'", line_no)
            return
        stmt = self.parse_statement(stmt_text, line_no)
        if stmt is None:
            return
        if name in self.cur_block.stmts:
            self.error("DuplicateName", f"point '{name}' declared twice", line_no)
            return
        self.cur_block.points.append(name)
        self.cur_block.stmts[name] = stmt

    def _on_edge(self, rest: str, line_no: int) -> None:
        if self.cur_block is None:
            self.error("SyntaxError", "'edge' outside a block", line_no)
            return
        main_text, _, guard_text = rest.partition(" when ")
        if "->" not in main_text:
            self.error("SyntaxError", "expected 'edge <id> -> <id> [when <bexpr>]'", line_no)
            return
        src_text, _, dst_text = main_text.partition("->")
        src = self.take_ident(src_text, line_no, "point")
        dst = self.take_ident(dst_text, line_no, "point")
        if src is None or dst is None:
            return
        if (src, dst) in self.cur_block.guards or (src, dst) in self.cur_block.edges:
            self.error("DuplicateName", f"edge {src} -> {dst} declared twice", line_no)
            return
        self.cur_block.edges.append((src, dst))
        if guard_text.strip():
            guard = self.parse_bexpr(guard_text, line_no)
            if guard is not None:
                self.cur_block.guards[(src, dst)] = guard

    def _on_entry(self, rest: str, line_no: int) -> None:
        if self.cur_block is None:
            self.error("SyntaxError", "'entry' outside a block", line_no)
            return
        name = self.take_ident(rest, line_no, "point")
        if name is not None:
            self.cur_block.entry = name

    def _on_exit(self, rest: str, line_no: int) -> None:
        if self.cur_block is None:
            self.error("SyntaxError", "'exit' outside a block", line_no)
            return
        name = self.take_ident(rest, line_no, "point")
        if name is not None:
            self.cur_block.exit = name

    # -- assembly ------------------------------------------------------------

    def _finish(self) -> Optional[AnnotatedProgram]:
        if self.name is None:
            self.diagnostics.append(Diagnostic("SyntaxError", "missing 'program' directive", "program", 1))
            return None
        if self.fatal:
            return None

        procedures: dict[str, AnnotatedProcedure] = {}
        broken = False
        for pname, acc in self.procs.items():
            blocks: dict[str, AnnotatedBlock] = {}
            for bname, bacc in acc.blocks.items():
                if bacc.entry is None or bacc.exit is None:
                    self.diagnostics.append(
                        Diagnostic(
                            "SyntaxError",
                            f"block '{bname}' lacks an entry or exit declaration",
                            f"procedure {pname}/block {bname}",
                        )
                    )
                    broken = True
                    continue
                blocks[bname] = AnnotatedBlock(
                    points=tuple(bacc.points),
                    stmts=dict(bacc.stmts),
                    edges=tuple(bacc.edges),
                    guards=dict(bacc.guards),
                    entry=bacc.entry,
                    exit=bacc.exit,
                    contract=bacc.contract,
                )
            if acc.entry_block is None:
                self.diagnostics.append(
                    Diagnostic("SyntaxError", f"procedure '{pname}' has no blocks", f"procedure {pname}")
                )
                broken = True
                continue
            procedures[pname] = AnnotatedProcedure(
                name=pname,
                locals=tuple(acc.locals),
                init_locals=dict(acc.init_locals),
                blocks=blocks,
                entry_block=acc.entry_block,
            )
        if broken:
            return None
        return AnnotatedProgram(
            name=self.name,
            procedures=procedures,
            main=self.main or "main",
            globals=tuple(self.globals),
            init_globals=self.init_globals,
        )


def parse_program(text: str) -> ParseResult:
    """Parse a ``.apg`` document; total, collects diagnostics instead of raising."""
    return _ProgramParser(text).run()


# ---------------------------------------------------------------------------
# Serialization


def _stmt_str(stmt: Statement) -> str:
    if isinstance(stmt, Assign):
        return f"{stmt.target} := {to_str(stmt.expr)}"
    if isinstance(stmt, Jump):
        return f"jump {stmt.block}"
    if isinstance(stmt, Call):
        return f"call {stmt.proc}"
    if isinstance(stmt, Return):
        return "return"
    return "skip"


def _value_str(value: Value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def serialize_program(prog: AnnotatedProgram) -> str:
    """Canonical text rendering; parse_program round-trips it structurally."""
    out: list[str] = [f"program {prog.name}"]
    for decl in prog.globals:
        out.append(f"global {decl.name} : {decl.domain}")
    if prog.init_globals != TRUE:
        out.append(f"init {to_str(prog.init_globals)}")
    if prog.main != "main":
        out.append(f"main {prog.main}")
    for proc in prog.procedures.values():
        out.append("")
        out.append(f"procedure {proc.name}")
        for decl in proc.locals:
            init = _value_str(proc.init_locals[decl.name])
            out.append(f"  local {decl.name} : {decl.domain} = {init}")
        # entry block first, remaining blocks in declaration order
        names = [proc.entry_block] + [b for b in proc.blocks if b != proc.entry_block]
        for bname in names:
            block = proc.blocks.get(bname)
            if block is None:
                continue
            header = f"  block {bname}"
            if not block.contract.is_empty:
                c = block.contract
                header += (
                    f" contract requires {to_str(c.requires)}"
                    f" ensures {to_str(c.ensures)}"
                    f" assigns {', '.join(c.assigns)}"
                ).rstrip()
            out.append(header)
            for v in block.points:
                out.append(f"    point {v} : {_stmt_str(block.stmts[v])}")
            for u, v in block.edges:
                guard = block.guards.get((u, v))
                if guard is None:
                    out.append(f"    edge {u} -> {v}")
                else:
                    out.append(f"    edge {u} -> {v} when {to_str(guard)}")
            out.append(f"    entry {block.entry}")
            out.append(f"    exit {block.exit}")
    return "\n".join(out) + "\n"
