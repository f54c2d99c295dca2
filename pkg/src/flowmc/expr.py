"""Expression language shared by the program IR and the action layer.

Expressions are boolean/integer trees over variables that may be primed
(``x'``, post-state), unprimed (``x``, pre-state) or wrapped in ``old(x)``
(pre-state references inside ensures clauses).  The concrete syntax uses
infix operators with C precedence.  The nondeterministic-choice marker
``any(<domain>)`` has no concrete syntax; it is built internally by
contract lowering and may only appear as the right-hand side of an
equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Optional, Union

Value = Union[int, bool]


class ExprError(Exception):
    """Base class for expression-level failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, pos: int) -> None:
        super().__init__(f"{message} (column {pos + 1})")
        self.pos = pos


class ExprTypeError(ExprError):
    pass


class UnboundVariableError(ExprError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unbound variable '{name}'")
        self.name = name


class EvalError(ExprError):
    pass


# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class Domain:
    """Value domain of a variable: ``bool``, ``int lo..hi`` or unbounded ``int``."""

    kind: str  # "bool" | "range" | "int"
    lo: int = 0
    hi: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("bool", "range", "int"):
            raise ValueError(f"bad domain kind {self.kind!r}")

    @property
    def is_finite(self) -> bool:
        return self.kind != "int"

    @property
    def type_name(self) -> str:
        return "bool" if self.kind == "bool" else "int"

    def contains(self, value: Value) -> bool:
        if self.kind == "bool":
            return isinstance(value, bool)
        if isinstance(value, bool) or not isinstance(value, int):
            return False
        if self.kind == "range":
            return self.lo <= value <= self.hi
        return True

    def values(self) -> Iterator[Value]:
        """Deterministic enumeration; finite domains only."""
        if self.kind == "bool":
            yield False
            yield True
        elif self.kind == "range":
            yield from range(self.lo, self.hi + 1)
        else:
            raise EvalError("cannot enumerate an unbounded int domain")

    def __str__(self) -> str:
        if self.kind == "bool":
            return "bool"
        if self.kind == "range":
            return f"int {self.lo}..{self.hi}"
        return "int"


BOOL = Domain("bool")


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class VarRef:
    name: str
    primed: bool = False


@dataclass(frozen=True)
class OldRef:
    """Pre-state reference ``old(x)``; legal only inside ensures clauses."""

    name: str


@dataclass(frozen=True)
class AnyVal:
    """Unconstrained in-domain choice; legal only as the rhs of an equality."""

    domain: Domain


@dataclass(frozen=True)
class Unary:
    op: str  # "!" | "-"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[IntLit, BoolLit, VarRef, OldRef, AnyVal, Unary, Binary]

TRUE = BoolLit(True)
FALSE = BoolLit(False)

_ARITH_OPS = ("+", "-", "*", "/", "%")
_CMP_OPS = ("<", "<=", ">", ">=")
_EQ_OPS = ("==", "!=")
_BOOL_OPS = ("&&", "||", "=>")

# Binding powers, C-style.  "=>" is right-associative.
_BINARY_POWER = {
    "=>": 1,
    "||": 2,
    "&&": 3,
    "==": 4,
    "!=": 4,
    "<": 5,
    "<=": 5,
    ">": 5,
    ">=": 5,
    "+": 6,
    "-": 6,
    "*": 7,
    "/": 7,
    "%": 7,
}
_UNARY_POWER = 8

KEYWORDS = frozenset({"true", "false", "old", "any"})


# ---------------------------------------------------------------------------
# Tokenizer / parser


@dataclass(frozen=True)
class _Token:
    kind: str  # "int" | "ident" | "op" | "end"
    text: str
    pos: int


_PUNCT = ("=>", "==", "!=", "<=", ">=", "&&", "||", "<", ">", "+", "-", "*", "/", "%", "!", "(", ")", ",")


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("int", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if j < n and text[j] == "'":
                tokens.append(_Token("primed", word, i))
                j += 1
            else:
                tokens.append(_Token("ident", word, i))
            i = j
            continue
        for punct in _PUNCT:
            if text.startswith(punct, i):
                tokens.append(_Token("op", punct, i))
                i += len(punct)
                break
        else:
            raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], allow_primed: bool, allow_old: bool) -> None:
        self.tokens = tokens
        self.index = 0
        self.allow_primed = allow_primed
        self.allow_old = allow_old

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect_op(self, text: str) -> None:
        tok = self.advance()
        if tok.kind != "op" or tok.text != text:
            raise ExprSyntaxError(f"expected {text!r}", tok.pos)

    def parse(self) -> Expr:
        expr = self.parse_expr(0)
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected trailing {tok.text!r}", tok.pos)
        return expr

    def parse_expr(self, min_power: int) -> Expr:
        left = self.parse_unary()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in _BINARY_POWER:
                return left
            power = _BINARY_POWER[tok.text]
            if power < min_power:
                return left
            self.advance()
            # right-associativity only for "=>"
            next_min = power if tok.text == "=>" else power + 1
            right = self.parse_expr(next_min)
            left = Binary(tok.text, left, right)

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("!", "-"):
            self.advance()
            operand = self.parse_expr(_UNARY_POWER)
            return Unary(tok.text, operand)
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        tok = self.advance()
        if tok.kind == "int":
            return IntLit(int(tok.text))
        if tok.kind == "op" and tok.text == "(":
            inner = self.parse_expr(0)
            self.expect_op(")")
            return inner
        if tok.kind == "primed":
            if not self.allow_primed:
                raise ExprSyntaxError("primed variables are not allowed here", tok.pos)
            if tok.text in KEYWORDS:
                raise ExprSyntaxError(f"{tok.text!r} cannot be primed", tok.pos)
            return VarRef(tok.text, primed=True)
        if tok.kind == "ident":
            if tok.text == "true":
                return TRUE
            if tok.text == "false":
                return FALSE
            if tok.text == "old":
                if not self.allow_old:
                    raise ExprSyntaxError("old(...) is only allowed in ensures clauses", tok.pos)
                self.expect_op("(")
                inner = self.advance()
                if inner.kind != "ident" or inner.text in KEYWORDS:
                    raise ExprSyntaxError("old(...) takes a variable name", inner.pos)
                self.expect_op(")")
                return OldRef(inner.text)
            if tok.text == "any":
                raise ExprSyntaxError("any(...) has no concrete syntax", tok.pos)
            return VarRef(tok.text, primed=False)
        raise ExprSyntaxError(f"unexpected {tok.text or 'end of expression'!r}", tok.pos)


def parse_expr(text: str, *, allow_primed: bool = False, allow_old: bool = False) -> Expr:
    """Parse an expression; raises ExprSyntaxError on malformed input."""
    return _Parser(_tokenize(text), allow_primed, allow_old).parse()


# ---------------------------------------------------------------------------
# Printing


def _power_of(expr: Expr) -> int:
    if isinstance(expr, Binary):
        return _BINARY_POWER[expr.op]
    if isinstance(expr, Unary):
        return _UNARY_POWER
    return 100


def to_str(expr: Expr) -> str:
    """Deterministic concrete rendering with minimal parentheses."""
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, VarRef):
        return expr.name + ("'" if expr.primed else "")
    if isinstance(expr, OldRef):
        return f"old({expr.name})"
    if isinstance(expr, AnyVal):
        return f"any({expr.domain})"
    if isinstance(expr, Unary):
        inner = to_str(expr.operand)
        if _power_of(expr.operand) < _UNARY_POWER:
            inner = f"({inner})"
        return expr.op + inner
    if isinstance(expr, Binary):
        power = _BINARY_POWER[expr.op]
        left = to_str(expr.left)
        right = to_str(expr.right)
        if _power_of(expr.left) < power:
            left = f"({left})"
        # operators are left-associative except "=>"
        right_min = power if expr.op == "=>" else power + 1
        if _power_of(expr.right) < right_min:
            right = f"({right})"
        return f"{left} {expr.op} {right}"
    raise TypeError(f"not an expression: {expr!r}")


# ---------------------------------------------------------------------------
# Traversal helpers


def walk(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, Unary):
        yield from walk(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk(expr.left)
        yield from walk(expr.right)


def free_vars(expr: Expr) -> tuple[frozenset[str], frozenset[str], frozenset[str]]:
    """Returns (unprimed, primed, old) variable name sets."""
    unprimed: set[str] = set()
    primed: set[str] = set()
    old: set[str] = set()
    for node in walk(expr):
        if isinstance(node, VarRef):
            (primed if node.primed else unprimed).add(node.name)
        elif isinstance(node, OldRef):
            old.add(node.name)
    return frozenset(unprimed), frozenset(primed), frozenset(old)


def map_vars(expr: Expr, fn: Callable[[Union[VarRef, OldRef]], Expr]) -> Expr:
    """Rebuild the tree, replacing every VarRef/OldRef through ``fn``."""
    if isinstance(expr, (VarRef, OldRef)):
        return fn(expr)
    if isinstance(expr, Unary):
        return Unary(expr.op, map_vars(expr.operand, fn))
    if isinstance(expr, Binary):
        return Binary(expr.op, map_vars(expr.left, fn), map_vars(expr.right, fn))
    return expr


def conj(parts: list[Expr]) -> Expr:
    """Left-associated conjunction, dropping literal ``true`` conjuncts."""
    useful = [p for p in parts if p != TRUE]
    if not useful:
        return TRUE
    out = useful[0]
    for part in useful[1:]:
        out = Binary("&&", out, part)
    return out


def conjuncts(expr: Expr) -> list[Expr]:
    """Flatten a top-level conjunction into its conjunct list."""
    if isinstance(expr, Binary) and expr.op == "&&":
        return conjuncts(expr.left) + conjuncts(expr.right)
    return [expr]


# ---------------------------------------------------------------------------
# Typing


def infer_type(expr: Expr, scope: Mapping[str, str]) -> str:
    """Returns "int" or "bool"; raises on ill-typed or unbound expressions.

    ``scope`` maps variable names to type names; primed and old references
    use the same scope.
    """
    if isinstance(expr, IntLit):
        return "int"
    if isinstance(expr, BoolLit):
        return "bool"
    if isinstance(expr, (VarRef, OldRef)):
        if expr.name not in scope:
            raise UnboundVariableError(expr.name)
        return scope[expr.name]
    if isinstance(expr, AnyVal):
        raise ExprTypeError("any(...) may only appear as the rhs of an equality")
    if isinstance(expr, Unary):
        inner = infer_type(expr.operand, scope)
        want = "bool" if expr.op == "!" else "int"
        if inner != want:
            raise ExprTypeError(f"operator {expr.op!r} expects {want}, got {inner}")
        return want
    if isinstance(expr, Binary):
        if expr.op in _EQ_OPS and isinstance(expr.right, AnyVal):
            left = infer_type(expr.left, scope)
            if left != expr.right.domain.type_name:
                raise ExprTypeError(f"any({expr.right.domain}) compared with {left}")
            return "bool"
        left = infer_type(expr.left, scope)
        right = infer_type(expr.right, scope)
        if expr.op in _ARITH_OPS:
            if left != "int" or right != "int":
                raise ExprTypeError(f"operator {expr.op!r} expects ints")
            return "int"
        if expr.op in _CMP_OPS:
            if left != "int" or right != "int":
                raise ExprTypeError(f"operator {expr.op!r} expects ints")
            return "bool"
        if expr.op in _EQ_OPS:
            if left != right:
                raise ExprTypeError(f"operator {expr.op!r} expects matching types")
            return "bool"
        if expr.op in _BOOL_OPS:
            if left != "bool" or right != "bool":
                raise ExprTypeError(f"operator {expr.op!r} expects bools")
            return "bool"
    raise ExprTypeError(f"cannot type {expr!r}")


# ---------------------------------------------------------------------------
# Evaluation


def _c_div(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("division by zero")
    q = a // b
    if q < 0 and q * b != a:
        q += 1  # truncate toward zero
    return q


def _c_mod(a: int, b: int) -> int:
    return a - b * _c_div(a, b)  # remainder follows the dividend's sign


def eval_expr(
    expr: Expr,
    pre: Mapping[str, Value],
    post: Optional[Mapping[str, Value]] = None,
) -> Value:
    """Evaluate with unprimed variables in ``pre`` and primed ones in ``post``."""
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, BoolLit):
        return expr.value
    if isinstance(expr, VarRef):
        env = post if expr.primed else pre
        if env is None or expr.name not in env:
            raise UnboundVariableError(expr.name + ("'" if expr.primed else ""))
        return env[expr.name]
    if isinstance(expr, OldRef):
        raise EvalError("old(...) must be lowered away before evaluation")
    if isinstance(expr, AnyVal):
        raise ExprTypeError("any(...) may only appear as the rhs of an equality")
    if isinstance(expr, Unary):
        val = eval_expr(expr.operand, pre, post)
        if expr.op == "!":
            if not isinstance(val, bool):
                raise ExprTypeError("'!' expects a bool")
            return not val
        if isinstance(val, bool):
            raise ExprTypeError("unary '-' expects an int")
        return -val
    if isinstance(expr, Binary):
        op = expr.op
        if op in _EQ_OPS and isinstance(expr.right, AnyVal):
            left = eval_expr(expr.left, pre, post)
            member = expr.right.domain.contains(left)
            return member if op == "==" else not member
        if op == "&&":
            return bool(eval_expr(expr.left, pre, post)) and bool(eval_expr(expr.right, pre, post))
        if op == "||":
            return bool(eval_expr(expr.left, pre, post)) or bool(eval_expr(expr.right, pre, post))
        if op == "=>":
            return (not eval_expr(expr.left, pre, post)) or bool(eval_expr(expr.right, pre, post))
        left = eval_expr(expr.left, pre, post)
        right = eval_expr(expr.right, pre, post)
        if op in _EQ_OPS:
            if isinstance(left, bool) != isinstance(right, bool):
                raise ExprTypeError(f"operator {op!r} expects matching types")
            return (left == right) if op == "==" else (left != right)
        if isinstance(left, bool) or isinstance(right, bool):
            raise ExprTypeError(f"operator {op!r} expects ints")
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            return _c_div(left, right)
        if op == "%":
            return _c_mod(left, right)
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        if op == ">=":
            return left >= right
    raise EvalError(f"cannot evaluate {expr!r}")
