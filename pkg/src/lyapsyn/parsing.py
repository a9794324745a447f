"""Parser for the ODE system text format.

Format, one statement per ``;``::

    param mu in (-2, 5];
    dx/dt = y;
    dy/dt = -(2+mu)*x - y;

State variables are the identifiers on the left-hand sides, in declaration
order, followed by the declared parameters.  Expressions use ``+ - * / ^``
with explicit ``*``, ``^`` only with non-negative integer exponents, and
integer or decimal literals (converted exactly to rationals).  The trailing
``;`` may be omitted on the last statement.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .odes import DynamicalSystem, ParameterDecl
from .polynomials import Polynomial, RationalFunction


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "number" | "op" | "eof"
    text: str
    line: int
    column: int


_OPS = set("+-*/^()[],;=")


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":  # comment to end of line
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isdigit() or (ch == "." and i + 1 < len(text) and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < len(text) and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            tokens.append(Token("number", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("ident", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch in _OPS:
            tokens.append(Token("op", ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.column)

    def expect_op(self, op: str) -> Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            self.fail(f"expected {op!r}, found {tok.text or 'end of input'!r}")
        return self.next()

    def at_op(self, op: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text == op

    def end_statement(self):
        # ';' is required between statements, optional before end of input
        if self.at_op(";"):
            self.next()
        elif self.peek().kind != "eof":
            self.fail("expected ';'")


def _parse_bound(p: _Parser) -> tuple[Fraction | None, Token]:
    """A signed numeric literal, or '-inf' for an unbounded lower end."""
    sign = 1
    tok = p.peek()
    if p.at_op("-"):
        p.next()
        sign = -1
    elif p.at_op("+"):
        p.next()
    tok = p.peek()
    if tok.kind == "ident" and tok.text == "inf":
        p.next()
        if sign > 0:
            p.fail("'+inf' is not a valid bound", tok)
        return None, tok
    if tok.kind != "number":
        p.fail("expected a numeric bound")
    p.next()
    return sign * Fraction(tok.text), tok


def _parse_param(p: _Parser) -> ParameterDecl:
    p.next()  # 'param'
    name_tok = p.peek()
    if name_tok.kind != "ident":
        p.fail("expected parameter name")
    p.next()
    kw = p.peek()
    if kw.kind != "ident" or kw.text != "in":
        p.fail("expected 'in'")
    p.next()
    if p.at_op("("):
        lower_inclusive = False
    elif p.at_op("["):
        lower_inclusive = True
    else:
        p.fail("expected '(' or '['")
    p.next()
    lower, lo_tok = _parse_bound(p)
    if lower is None and lower_inclusive:
        p.fail("'-inf' requires an open bracket '('", lo_tok)
    p.expect_op(",")
    upper, up_tok = _parse_bound(p)
    if upper is None:
        p.fail("upper bound must be finite", up_tok)
    if p.at_op(")"):
        upper_inclusive = False
    elif p.at_op("]"):
        upper_inclusive = True
    else:
        p.fail("expected ')' or ']'")
    p.next()
    p.end_statement()
    if lower is not None and not lower < upper:
        raise ParseError(
            f"empty parameter range for {name_tok.text}", lo_tok.line, lo_tok.column
        )
    return ParameterDecl(name_tok.text, lower, lower_inclusive, upper, upper_inclusive)


class _ExprParser:
    """Recursive-descent expression parser over rational-function values."""

    def __init__(self, p: _Parser, symbols: dict[str, int], arity: int):
        self.p = p
        self.symbols = symbols
        self.arity = arity

    def parse(self) -> RationalFunction:
        value = self.expr()
        return value

    def expr(self) -> RationalFunction:
        value = self.term()
        while self.p.at_op("+") or self.p.at_op("-"):
            op = self.p.next().text
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> RationalFunction:
        value = self.unary()
        while self.p.at_op("*") or self.p.at_op("/"):
            tok = self.p.next()
            rhs = self.unary()
            if tok.text == "*":
                value = value * rhs
            else:
                if rhs.num.is_zero():
                    self.p.fail("division by zero", tok)
                value = value / rhs
        return value

    def unary(self) -> RationalFunction:
        if self.p.at_op("-"):
            self.p.next()
            return -self.unary()
        if self.p.at_op("+"):
            self.p.next()
            return self.unary()
        return self.power()

    def power(self) -> RationalFunction:
        base = self.atom()
        while self.p.at_op("^"):
            caret = self.p.next()
            exp_tok = self.p.peek()
            if exp_tok.kind != "number" or "." in exp_tok.text:
                self.p.fail("exponent must be a non-negative integer", caret)
            self.p.next()
            base = base ** int(exp_tok.text)
        return base

    def atom(self) -> RationalFunction:
        tok = self.p.peek()
        if tok.kind == "number":
            self.p.next()
            return RationalFunction.constant(Fraction(tok.text), self.arity)
        if tok.kind == "ident":
            index = self.symbols.get(tok.text)
            if index is None:
                self.p.fail(f"unknown variable {tok.text!r}", tok)
            self.p.next()
            return RationalFunction(Polynomial.variable(index, self.arity))
        if self.p.at_op("("):
            self.p.next()
            value = self.expr()
            self.p.expect_op(")")
            return value
        self.p.fail(f"expected an expression, found {tok.text or 'end of input'!r}")


def _split_statements(tokens: list[Token]) -> list[list[Token]]:
    statements: list[list[Token]] = []
    current: list[Token] = []
    for tok in tokens:
        if tok.kind == "eof":
            break
        current.append(tok)
        if tok.kind == "op" and tok.text == ";":
            statements.append(current)
            current = []
    if current:
        current.append(Token("op", ";", current[-1].line, current[-1].column + 1))
        statements.append(current)
    return statements


def parse_system(text: str) -> DynamicalSystem:
    """Parse the system format into a :class:`DynamicalSystem`."""
    tokens = tokenize(text)
    statements = _split_statements(tokens)
    if not statements:
        raise ParseError("empty input", 1, 1)

    # first pass: kinds and state names, so expressions can see every symbol
    param_stmts: list[list[Token]] = []
    ode_stmts: list[tuple[str, list[Token]]] = []
    for stmt in statements:
        head = stmt[0]
        if head.kind == "ident" and head.text == "param":
            if ode_stmts:
                raise ParseError(
                    "parameter declarations must precede equations",
                    head.line, head.column,
                )
            param_stmts.append(stmt)
            continue
        if head.kind != "ident" or len(head.text) < 2 or not head.text.startswith("d"):
            raise ParseError(
                f"expected 'd<var>/dt = ...' or 'param', found {head.text!r}",
                head.line, head.column,
            )
        ode_stmts.append((head.text[1:], stmt))

    params = []
    for stmt in param_stmts:
        sub = _Parser(stmt + [Token("eof", "", stmt[-1].line, stmt[-1].column)])
        params.append(_parse_param(sub))

    state_names = [name for name, _ in ode_stmts]
    if not state_names:
        raise ParseError("no equations found", 1, 1)
    symbols: dict[str, int] = {}
    for i, name in enumerate(state_names + [p.name for p in params]):
        if name in symbols:
            raise ParseError(f"duplicate name {name!r}", 1, 1)
        symbols[name] = i
    arity = len(symbols)

    rhs = []
    for name, stmt in ode_stmts:
        sub = _Parser(stmt + [Token("eof", "", stmt[-1].line, stmt[-1].column)])
        sub.next()  # d<var>
        if not sub.at_op("/"):
            sub.fail("expected '/dt'")
        sub.next()
        dt = sub.peek()
        if dt.kind != "ident" or dt.text != "dt":
            sub.fail("expected 'dt'", dt)
        sub.next()
        sub.expect_op("=")
        expr = _ExprParser(sub, symbols, arity).parse()
        sub.end_statement()
        if sub.peek().kind != "eof":
            sub.fail("unexpected trailing input")
        rhs.append(expr)

    return DynamicalSystem(tuple(state_names), tuple(rhs), tuple(params))
