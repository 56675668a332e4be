"""Text grammar for expressions, ODEs, vector fields and commutator tables.

Grammar (precedence low to high: ``+ -``, ``* /``, unary ``-``, ``^``)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := atom ('^' unary)?            # right associative
    atom     := NUMBER | 'x' | 'y' primes? | 'y^(' INT ')' | 'e'
              | NAME primes? '(' expr ')' | '(' expr ')' | 'd/dx' | 'd/dy'

Unknown functions have to be declared (``unknown F/1``); implicit
multiplication is rejected.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import sympy as sp

from .expr import (
    X,
    Y,
    Ode,
    UnknownFunction,
    canonicalize,
    jet,
    jet_order,
    max_jet_order,
    solve_for_top,
    unknown_function,
)
from .lie import CommutatorTable, VectorField

MAX_PRIMES = 4
BUILTIN_FUNCTIONS = {"exp": sp.exp, "ln": sp.log, "log": sp.log}

_DX = sp.Symbol("__d_dx")
_DY = sp.Symbol("__d_dy")


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, prime, dd, eof
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<dd>d/d[xy]\b)|(?P<num>\d+(?:\.\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<prime>['′])|(?P<op>[-+*/^(),=\[\]])"
)


def tokenize(text: str, line: int = 1) -> list[Token]:
    tokens = []
    pos = 0
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass
class Context:
    """Declared unknown functions and the highest admissible jet order."""

    unknowns: dict[str, int] = field(default_factory=dict)
    max_order: int | None = None
    allow_operators: bool = False


class _Parser:
    def __init__(self, tokens: list[Token], ctx: Context):
        self.tokens = tokens
        self.i = 0
        self.ctx = ctx

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.column)

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            what = "end of input" if self.tok.kind == "eof" else repr(self.tok.text)
            self.error(f"expected {text!r}, found {what}")
        return self.advance()

    # Pratt loop: binding powers 10 (+ -), 20 (* /), 30 (unary -), 40 (^)
    def expression(self, rbp: int = 0):
        left = self.prefix()
        while True:
            t = self.tok
            if t.text in ("+", "-") and rbp < 10:
                self.advance()
                right = self.expression(10)
                left = left + right if t.text == "+" else left - right
            elif t.text in ("*", "/") and rbp < 20:
                self.advance()
                right = self.expression(20)
                left = left * right if t.text == "*" else left / right
            elif t.text == "^" and rbp < 40:
                self.advance()
                left = self.power_rhs(left, t)
            elif t.kind in ("num", "name", "dd") or t.text == "(":
                self.error("implicit multiplication is not allowed; write '*'")
            else:
                return left

    def power_rhs(self, base, op: Token):
        # y^(k) is the k-th jet, not a power
        if base == Y and self.tok.text == "(" and self.tokens[self.i + 1].kind == "num":
            nxt = self.tokens[self.i + 2]
            if nxt.text == ")" and self.tokens[self.i + 1].text.isdigit():
                self.advance()
                k = int(self.advance().text)
                self.advance()
                if k < 1:
                    self.error("jet order must be >= 1", op)
                return self.make_jet(k, op)
        exponent = self.expression(30 - 1)  # right associative, binds unary minus
        if not sp.sympify(exponent).is_Rational and not self._power_ok(base, exponent):
            self.error("exponents must be rational constants", op)
        return base**exponent

    @staticmethod
    def _power_ok(base, exponent) -> bool:
        return base == sp.E

    def make_jet(self, k: int, tok: Token):
        if self.ctx.max_order is not None and k > self.ctx.max_order:
            self.error(f"jet y^({k}) exceeds the declared order {self.ctx.max_order}", tok)
        return jet(k)

    def prefix(self):
        t = self.advance()
        if t.text == "-":
            return -self.expression(30)
        if t.text == "+":
            return self.expression(30)
        if t.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        if t.kind == "num":
            return sp.Rational(Fraction(t.text))
        if t.kind == "dd":
            if not self.ctx.allow_operators:
                self.error("derivative operator outside a vector field", t)
            return _DX if t.text == "d/dx" else _DY
        if t.kind == "name":
            return self.name(t)
        if t.kind == "eof":
            self.error("unexpected end of input", t)
        self.error(f"unexpected {t.text!r}", t)

    def primes(self) -> int:
        n = 0
        while self.tok.kind == "prime":
            self.advance()
            n += 1
        return n

    def name(self, t: Token):
        name = t.text
        n = self.primes()
        if name == "x" and not n:
            return X
        if name == "y":
            if n > MAX_PRIMES:
                self.error(f"at most {MAX_PRIMES} primes; write y^(k)", t)
            return self.make_jet(n, t) if n else Y
        if name == "e" and not n:
            return sp.E
        if name in BUILTIN_FUNCTIONS and not n:
            self.expect("(")
            arg = self.expression(0)
            self.expect(")")
            return BUILTIN_FUNCTIONS[name](arg)
        if name in self.ctx.unknowns:
            if self.tok.text != "(":
                self.error(f"unknown function {name} must be applied", self.tok)
            self.advance()
            arg = self.expression(0)
            self.expect(")")
            return unknown_function(name, n)(arg)
        if self.tok.text == "(":
            self.error(f"undeclared function symbol {name!r}", t)
        self.error(f"unknown symbol {name!r}", t)


def _declared(unknowns) -> dict[str, int]:
    if unknowns is None:
        return {}
    if isinstance(unknowns, dict):
        return dict(unknowns)
    return {name: 1 for name in unknowns}


def parse_expression(text: str, unknowns=None, max_order: int | None = None, line: int = 1):
    ctx = Context(_declared(unknowns), max_order)
    p = _Parser(tokenize(text, line), ctx)
    e = p.expression()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    return canonicalize(e)


def parse_ode(text: str, unknowns=None, line: int = 1) -> Ode:
    """``lhs = rhs``; solved for the highest jet when the lhs is not already it."""
    if text.count("=") != 1:
        col = text.find("=") + 1 if "=" in text else len(text) + 1
        raise ParseError("an ODE needs exactly one '='", line, col)
    lhs_text, rhs_text = text.split("=")
    lhs = parse_expression(lhs_text, unknowns, line=line)
    offset = len(lhs_text) + 1
    rhs = parse_expression(" " * offset + rhs_text, unknowns, line=line)
    n = max(max_jet_order(lhs), max_jet_order(rhs))
    if n < 1:
        raise ParseError("equation contains no derivative of y", line, 1)
    if lhs == jet(n) and max_jet_order(rhs) < n:
        return Ode(n, rhs)
    try:
        return solve_for_top(lhs, rhs, n)
    except ValueError as exc:
        raise ParseError(str(exc), line, 1) from None


def parse_vector_field(text: str, name: str = "V", line: int = 1) -> VectorField:
    ctx = Context({}, None, allow_operators=True)
    p = _Parser(tokenize(text, line), ctx)
    e = p.expression()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    e = sp.expand(e)
    xi = sp.diff(e, _DX)
    eta = sp.diff(e, _DY)
    rest = sp.expand(e - xi * _DX - eta * _DY)
    if rest != 0 or xi.has(_DX, _DY) or eta.has(_DX, _DY):
        raise ParseError("a vector field must be linear in d/dx and d/dy", line, 1)
    if max_jet_order(xi) > 0 or max_jet_order(eta) > 0:
        raise ParseError("jet variable in point-symmetry coefficient", line, 1)
    try:
        return VectorField(name, xi, eta)
    except ValueError as exc:
        raise ParseError(str(exc), line, 1) from None


_BRACKET_RE = re.compile(r"^\s*\[\s*(\w+)\s*,\s*(\w+)\s*\]\s*=\s*(.*)$")


def parse_commutator_table(text: str, basis: Iterable[str] | None = None) -> CommutatorTable:
    """Lines ``[A,B] = c1*A + c2*B``; omitted pairs are zero. A ``basis A, B, ...``
    line fixes the ordering (otherwise: order of first appearance)."""
    names = list(basis or [])
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("basis"):
            names = [n for n in re.split(r"[\s,]+", line[5:].strip()) if n]
            continue
        m = _BRACKET_RE.match(line)
        if m is None:
            raise ParseError("expected '[A,B] = ...' or 'basis ...'", lineno, 1)
        a, b, rhs = m.groups()
        for n in (a, b):
            if n not in names:
                names.append(n)
        entries.append((lineno, a, b, rhs, raw.index(rhs) + 1))
    syms = {n: sp.Symbol(n) for n in names}
    table = CommutatorTable(list(names))
    for lineno, a, b, rhs, col in entries:
        try:
            value = sp.expand(sp.sympify(rhs.replace("^", "**"), locals=syms))
        except (sp.SympifyError, SyntaxError):
            raise ParseError("malformed bracket value", lineno, col) from None
        extra = value.free_symbols - set(syms.values())
        if extra:
            raise ParseError(f"unknown basis element {sorted(map(str, extra))[0]}", lineno, col)
        coeffs = []
        for n in names:
            c = value.coeff(syms[n])
            if not c.is_Rational:
                raise ParseError("structure constants must be rational", lineno, col)
            coeffs.append(Fraction(int(c.p), int(c.q)))
        linear = sum(sp.Rational(c.numerator, c.denominator) * syms[n] for c, n in zip(coeffs, names))
        if sp.expand(value - linear) != 0:
            raise ParseError("bracket value must be a linear combination of the basis", lineno, col)
        i, j = names.index(a), names.index(b)
        vec = tuple(coeffs)
        if i == j:
            if any(vec):
                raise ParseError("[A,A] must vanish", lineno, 1)
            continue
        if i > j:
            i, j, vec = j, i, tuple(-c for c in vec)
        if (i, j) in table.brackets and table.brackets[(i, j)] != vec:
            raise ParseError("conflicting bracket entries", lineno, 1)
        if any(vec):
            table.brackets[(i, j)] = vec
    return table


# ---------------------------------------------------------------- printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 10, 20, 30, 40, 50


def _fmt_symbol(s) -> str:
    k = jet_order(s)
    if k is None or k == 0:
        return s.name
    return "y" + "'" * k if k <= MAX_PRIMES else f"y^({k})"


def _fmt_rational(r) -> tuple[str, int]:
    if r.q == 1:
        return (str(r.p), _PREC_ATOM) if r.p >= 0 else (str(r.p), _PREC_NEG)
    text = f"{abs(r.p)}/{r.q}"
    return (text, _PREC_MUL) if r.p > 0 else ("-" + text, _PREC_NEG)


def _factor_key(fac):
    base = fac.as_base_exp()[0]
    if base.is_Symbol:
        k = jet_order(base)
        return (0, -1 if k is None else k, "")
    return (1, 0, sp.default_sort_key(fac))


def _paren(text: str, prec: int, need: int) -> str:
    return f"({text})" if prec < need else text


def _fmt(e) -> tuple[str, int]:
    if e.is_Rational:
        return _fmt_rational(e)
    if e is sp.E:
        return "e", _PREC_ATOM
    if e.is_Symbol:
        return _fmt_symbol(e), _PREC_ATOM
    if isinstance(e, UnknownFunction):
        return f"{e.func.__name__}({_fmt(e.args[0])[0]})", _PREC_ATOM
    if isinstance(e, sp.exp):
        return f"exp({_fmt(e.args[0])[0]})", _PREC_ATOM
    if isinstance(e, sp.log):
        return f"ln({_fmt(e.args[0])[0]})", _PREC_ATOM
    if e.is_Add:
        terms = sp.Add.make_args(e)
        terms = sorted(terms, key=lambda t: (t.is_Number, -max_jet_order(t), sp.default_sort_key(t)))
        out = ""
        for idx, term in enumerate(terms):
            coeff, _ = term.as_coeff_Mul()
            if idx and coeff.is_negative:
                text, prec = _fmt(-term)
                out += " - " + _paren(text, prec, _PREC_MUL)
            else:
                text, prec = _fmt(term)
                out += (" + " if idx else "") + _paren(text, prec, _PREC_ADD + 1)
        return out, _PREC_ADD
    if e.is_Mul:
        coeff, rest = e.as_coeff_Mul()
        if coeff.is_negative:
            text, prec = _fmt(-e)
            return "-" + _paren(text, prec, _PREC_MUL), _PREC_NEG
        num, den = [], []
        if coeff != 1:
            if coeff.p != 1:
                num.append(sp.Integer(coeff.p))
            if coeff.q != 1:
                den.append(sp.Integer(coeff.q))
        for fac in sorted(sp.Mul.make_args(rest), key=_factor_key):
            b, ex = fac.as_base_exp()
            if ex.is_Rational and ex.is_negative:
                den.append(b if ex == -1 else sp.Pow(b, -ex, evaluate=False))
            else:
                num.append(fac)
        num_text = "*".join(_paren(*_fmt(f), _PREC_MUL + 1) for f in num) or "1"
        if not den:
            return num_text, _PREC_MUL
        if len(den) == 1:
            dt, dp = _fmt(den[0])
            den_text = _paren(dt, dp, _PREC_POW)
        else:
            den_text = "(" + "*".join(_paren(*_fmt(f), _PREC_MUL + 1) for f in den) + ")"
        return f"{num_text}/{den_text}", _PREC_MUL
    if e.is_Pow:
        b, ex = e.as_base_exp()
        if ex.is_Rational and ex.is_negative:
            bt, bp = _fmt(b if ex == -1 else sp.Pow(b, -ex, evaluate=False))
            return "1/" + _paren(bt, bp, _PREC_POW), _PREC_MUL
        bt, bp = _fmt(b)
        et, ep = _fmt(ex)
        return f"{_paren(bt, bp, _PREC_ATOM)}^{_paren(et, ep, _PREC_ATOM)}", _PREC_POW
    raise ValueError(f"cannot print {e!r} in the input grammar")


def format_expression(e) -> str:
    return _fmt(canonicalize(e))[0]


def format_ode(e: Ode) -> str:
    return f"{_fmt_symbol(jet(e.order))} = {format_expression(e.rhs)}"


def format_vector_field(f: VectorField) -> str:
    parts = []
    for coeff, op in ((f.xi, "d/dx"), (f.eta, "d/dy")):
        if coeff == 0:
            continue
        if coeff == 1:
            parts.append(op)
        elif coeff == -1:
            parts.append("-" + op)
        else:
            text, prec = _fmt(coeff)
            parts.append(f"{_paren(text, prec, _PREC_MUL + 1)}*{op}")
    if not parts:
        return "0"
    out = parts[0]
    for p in parts[1:]:
        out += " - " + p[1:] if p.startswith("-") else " + " + p
    return out


def format_commutator_table(t: CommutatorTable) -> str:
    lines = ["basis " + ", ".join(t.names)]
    for (a, b), terms in t.nonzero().items():
        rhs = " + ".join(f"{c}*{n}" if c != 1 else n for n, c in terms.items())
        lines.append(f"[{a},{b}] = {rhs.replace('+ -', '- ')}")
    return "\n".join(lines)


# ---------------------------------------------------------------- problem files


@dataclass
class SourceProblem:
    ode: Ode
    generators: list[VectorField]
    unknowns: dict[str, int]


_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z_0-9]*$")


def parse_problem(text: str) -> SourceProblem:
    """Problem file::

        unknown F/1
        ode y'''' = F(y''')
        sym X = d/dy
        sym Y = x*d/dy
    """
    unknowns: dict[str, int] = {}
    ode_line = None
    syms: list[tuple[int, str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        head, _, rest = line.strip().partition(" ")
        if head == "unknown":
            for decl in re.split(r"[\s,]+", rest.strip()):
                unknowns.update(parse_unknown_decl(decl, lineno))
        elif head == "ode":
            ode_line = (lineno, rest)
        elif head == "sym":
            name, eq, field_text = rest.partition("=")
            name = name.strip()
            if not eq or not _NAME_RE.match(name):
                raise ParseError("expected 'sym NAME = <vector field>'", lineno, 1)
            syms.append((lineno, name, field_text))
        else:
            raise ParseError(f"unknown directive {head!r}", lineno, 1)
    if ode_line is None:
        raise ParseError("missing 'ode' line", 1, 1)
    ode = parse_ode(ode_line[1], unknowns, line=ode_line[0])
    names = [n for _, n, _ in syms]
    if len(set(names)) != len(names):
        raise ParseError("generator names must be unique", 1, 1)
    gens = [parse_vector_field(t, n, line=ln) for ln, n, t in syms]
    return SourceProblem(ode, gens, unknowns)


def parse_unknown_decl(decl: str, line: int = 1) -> dict[str, int]:
    name, _, arity = decl.partition("/")
    if not _NAME_RE.match(name) or name in ("x", "y", "e") or name in BUILTIN_FUNCTIONS:
        raise ParseError(f"bad unknown-function name {name!r}", line, 1)
    arity_n = int(arity) if arity else 1
    if arity_n != 1:
        raise ParseError("only unary unknown functions are supported", line, 1)
    return {name: 1}


# ---------------------------------------------------------------- traces


def emit_trace(path, numeric_checks=None) -> str:
    """Serialize a ReductionPath to the trace JSON document."""
    doc = trace_document(path)
    if numeric_checks is not None:
        doc["numeric_checks"] = numeric_checks
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def trace_document(path) -> dict:
    steps = []
    for st in path.steps:
        steps.append(
            {
                "level": st.level,
                "equation": format_ode(st.parent),
                "generator": st.generator.name,
                "generator_field": format_vector_field(st.generator),
                "invariants": {"u": format_expression(st.u), "v": format_expression(st.v)},
                "child": format_ode(st.child),
                "symmetries": [
                    {
                        "name": s.name,
                        "status": s.status,
                        "restriction": None if s.restriction is None else format_vector_field(s.restriction),
                        **({"note": s.note} if s.note else {}),
                    }
                    for s in st.statuses
                ],
            }
        )
    terminal = path.terminal
    return {
        "unknowns": sorted(path.unknowns),
        "source": format_ode(path.source),
        "steps": steps,
        "terminal": {
            "order": terminal.order,
            "equation": format_ode(terminal),
            "known_point_symmetries": [s.name for s in path.terminal_symmetries],
            "fields": {s.name: format_vector_field(s) for s in path.terminal_symmetries},
        },
    }


def load_trace(text: str) -> dict:
    """Parse a trace document back into kernel objects (inverse of emit_trace)."""
    doc = json.loads(text)
    unknowns = doc.get("unknowns", [])
    out = {
        "source": parse_ode(doc["source"], unknowns),
        "steps": [],
        "terminal": {
            "order": doc["terminal"]["order"],
            "equation": parse_ode(doc["terminal"]["equation"], unknowns),
            "known_point_symmetries": list(doc["terminal"]["known_point_symmetries"]),
            "fields": {
                n: parse_vector_field(t, n) for n, t in doc["terminal"].get("fields", {}).items()
            },
        },
        "numeric_checks": doc.get("numeric_checks"),
    }
    for st in doc["steps"]:
        out["steps"].append(
            {
                "level": st["level"],
                "equation": parse_ode(st["equation"], unknowns),
                "generator": parse_vector_field(st["generator_field"], st["generator"]),
                "u": parse_expression(st["invariants"]["u"], unknowns),
                "v": parse_expression(st["invariants"]["v"], unknowns),
                "child": parse_ode(st["child"], unknowns),
                "symmetries": [
                    {
                        "name": s["name"],
                        "status": s["status"],
                        "restriction": None
                        if s["restriction"] is None
                        else parse_vector_field(s["restriction"], s["name"]),
                    }
                    for s in st["symmetries"]
                ],
            }
        )
    return out
