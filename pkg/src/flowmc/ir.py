"""Annotated-program intermediate representation.

A program is a collection of procedures; a procedure is a collection of
code blocks; a block is a little graph of control points labelled with
statements, with boolean path conditions on its edges and an optional
requires/ensures/assigns contract.  Values are immutable after
construction and safe to share across threads.

Jump semantics (see docs/ir-format.md): ``jump b`` transfers control to
block ``b``'s entry point; when ``b``'s exit point finishes and its
statement is neither a jump nor a return, control resumes at the jump
point's successors.  A jump to a block that is already part of the
current merge keeps a back-edge instead of unrolling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .expr import Domain, Expr, TRUE, Value


# ---------------------------------------------------------------------------
# Diagnostics


@dataclass(frozen=True)
class Diagnostic:
    """A validation or parse finding: machine code, human message, entity path."""

    code: str
    message: str
    path: str = ""
    line: Optional[int] = None
    col: Optional[int] = None

    def __str__(self) -> str:
        loc = f" [line {self.line}]" if self.line is not None else ""
        where = f" ({self.path})" if self.path else ""
        return f"{self.code}: {self.message}{where}{loc}"


# ---------------------------------------------------------------------------
# Statements


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr


@dataclass(frozen=True)
class Jump:
    block: str


@dataclass(frozen=True)
class Call:
    proc: str


@dataclass(frozen=True)
class Return:
    pass


@dataclass(frozen=True)
class Skip:
    pass


Statement = Union[Assign, Jump, Call, Return, Skip]


# ---------------------------------------------------------------------------
# Contracts and declarations


@dataclass(frozen=True)
class Contract:
    """requires/ensures/assigns specification; ``Contract.empty()`` marks
    unspecified blocks."""

    kind: str  # "empty" | "spec"
    requires: Expr = TRUE
    ensures: Expr = TRUE
    assigns: tuple[str, ...] = ()

    @staticmethod
    def empty() -> "Contract":
        return _EMPTY_CONTRACT

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"


_EMPTY_CONTRACT = Contract(kind="empty")


@dataclass(frozen=True)
class VarDecl:
    name: str
    domain: Domain


# ---------------------------------------------------------------------------
# Blocks, procedures, programs


@dataclass(frozen=True)
class AnnotatedBlock:
    """Control points labelled with statements plus guarded internal edges.

    ``points`` keeps declaration order; node numbering in the abstraction
    step follows it, so goldens stay stable.  An absent guard entry means
    the edge is unguarded (constant true).
    """

    points: tuple[str, ...]
    stmts: dict[str, Statement]
    edges: tuple[tuple[str, str], ...]
    guards: dict[tuple[str, str], Expr]
    entry: str
    exit: str
    contract: Contract = field(default_factory=Contract.empty)


@dataclass(frozen=True)
class AnnotatedProcedure:
    name: str
    locals: tuple[VarDecl, ...]
    init_locals: dict[str, Value]
    blocks: dict[str, AnnotatedBlock]
    entry_block: str


@dataclass(frozen=True)
class AnnotatedProgram:
    name: str
    procedures: dict[str, AnnotatedProcedure]
    main: str
    globals: tuple[VarDecl, ...] = ()
    init_globals: Expr = TRUE

    def global_domains(self) -> dict[str, Domain]:
        return {decl.name: decl.domain for decl in self.globals}

    def local_domains(self, proc: str) -> dict[str, Domain]:
        return {decl.name: decl.domain for decl in self.procedures[proc].locals}


# ---------------------------------------------------------------------------
# Validation


def _check_value(domain: Domain, value: Value) -> bool:
    return domain.contains(value)


def validate_program(prog: AnnotatedProgram) -> list[Diagnostic]:
    """Check the structural invariants; empty result means the program is valid.

    Expression scoping and typing are deliberately not checked here: guards
    and contracts are checked where they are lowered to actions, because
    contract clauses may legitimately mention caller-scope variables.
    """
    out: list[Diagnostic] = []

    def bad(code: str, message: str, path: str) -> None:
        out.append(Diagnostic(code, message, path))

    global_names: set[str] = set()
    for decl in prog.globals:
        if decl.name in global_names:
            bad("DuplicateName", f"global '{decl.name}' declared twice", "program")
        global_names.add(decl.name)
        if decl.domain.kind == "range" and decl.domain.lo > decl.domain.hi:
            bad("BadDomain", f"empty range for global '{decl.name}'", "program")

    if prog.main not in prog.procedures:
        bad("MissingMain", f"main procedure '{prog.main}' is not declared", "program")

    for pname, proc in prog.procedures.items():
        ppath = f"procedure {pname}"
        local_names: set[str] = set()
        for decl in proc.locals:
            if decl.name in local_names:
                bad("DuplicateName", f"local '{decl.name}' declared twice", ppath)
            local_names.add(decl.name)
            if decl.name in global_names:
                bad("ShadowedGlobal", f"local '{decl.name}' shadows a global", ppath)
            if decl.domain.kind == "range" and decl.domain.lo > decl.domain.hi:
                bad("BadDomain", f"empty range for local '{decl.name}'", ppath)
            if decl.name not in proc.init_locals:
                bad("BadInitValue", f"local '{decl.name}' has no initial value", ppath)
            elif not _check_value(decl.domain, proc.init_locals[decl.name]):
                bad("BadInitValue", f"initial value of '{decl.name}' outside its domain", ppath)

        if proc.entry_block not in proc.blocks:
            bad("DanglingReference", f"entry block '{proc.entry_block}' is not declared", ppath)

        for bname, block in proc.blocks.items():
            bpath = f"{ppath}/block {bname}"
            points = set(block.points)
            if block.entry not in points:
                bad("MissingPoint", f"entry point '{block.entry}' is not a point", bpath)
            if block.exit not in points:
                bad("MissingPoint", f"exit point '{block.exit}' is not a point", bpath)
            for u, v in block.edges:
                if u not in points or v not in points:
                    bad("MissingPoint", f"edge {u} -> {v} leaves the block", bpath)
                if u == block.exit:
                    bad("ExitHasSuccessor", f"exit point '{u}' has an outgoing edge", bpath)
            for v in block.points:
                stmt = block.stmts.get(v)
                if stmt is None:
                    bad("MissingPoint", f"point '{v}' has no statement", bpath)
                    continue
                vpath = f"{bpath}/point {v}"
                if isinstance(stmt, Return) and v != block.exit:
                    bad("ReturnNotAtExit", "return statement away from the block exit", vpath)
                if isinstance(stmt, Jump) and stmt.block not in proc.blocks:
                    bad("DanglingReference", f"jump targets undeclared block '{stmt.block}'", vpath)
                if isinstance(stmt, Call) and stmt.proc not in prog.procedures:
                    bad("DanglingReference", f"call targets undeclared procedure '{stmt.proc}'", vpath)

    return out


__all__ = [
    "AnnotatedBlock",
    "AnnotatedProcedure",
    "AnnotatedProgram",
    "Assign",
    "Call",
    "Contract",
    "Diagnostic",
    "Jump",
    "Return",
    "Skip",
    "Statement",
    "VarDecl",
    "validate_program",
]
