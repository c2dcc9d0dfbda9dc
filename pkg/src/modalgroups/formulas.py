"""The modal group language: terms, formulas, parser, printer, builders.

Concrete syntax:

    term    := "e" | IDENT | "$" INT | term "*" term
             | "inv(" term ")" | "(" term ")"
    formula := term "=" term | "not" formula
             | formula ("&" | "|" | "->") formula
             | ("forall" | "exists") IDENT formula
             | ("box" | "dia") formula | "(" formula ")"

Precedence: not > & > | > ->.  Quantifiers and modalities bind to the end
of the enclosing scope.  "$k" names the k-th entry of a world's parameter
tuple; named free variables are parameters bound by name.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .verdict import InvariantError

_KEYWORDS = frozenset({"e", "inv", "not", "forall", "exists", "box", "dia"})


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class BuilderError(ValueError):
    pass


# ---------------------------------------------------------------------------
# AST


class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Ident(Term):
    """The group identity constant."""


@dataclass(frozen=True)
class Var(Term):
    name: str

    def __post_init__(self):
        if self.name in _KEYWORDS:
            raise BuilderError(f"variable name {self.name!r} is reserved")


@dataclass(frozen=True)
class Param(Term):
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise BuilderError("parameter index must be nonnegative")


@dataclass(frozen=True)
class Mul(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Inv(Term):
    inner: Term


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Eq(Formula):
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class ForAll(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Box(Formula):
    body: Formula


@dataclass(frozen=True)
class Dia(Formula):
    body: Formula


E = Ident()


def v(name: str) -> Var:
    return Var(name)


def mul(*terms: Term) -> Term:
    """Left-associated product of one or more terms."""
    if not terms:
        raise BuilderError("empty product")
    out = terms[0]
    for t in terms[1:]:
        out = Mul(out, t)
    return out


def power(t: Term, k: int) -> Term:
    """t written as an explicit k-fold product (k >= 1)."""
    if k < 1:
        raise BuilderError("power exponent must be positive")
    out = t
    for _ in range(k - 1):
        out = Mul(out, t)
    return out


def conj(parts: list[Formula]) -> Formula:
    if not parts:
        raise BuilderError("empty conjunction")
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disj(parts: list[Formula]) -> Formula:
    if not parts:
        raise BuilderError("empty disjunction")
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def neq(a: Term, b: Term) -> Formula:
    return Not(Eq(a, b))


# ---------------------------------------------------------------------------
# Variable bookkeeping


def term_vars(t: Term) -> frozenset[str]:
    if isinstance(t, Var):
        return frozenset({t.name})
    if isinstance(t, Mul):
        return term_vars(t.left) | term_vars(t.right)
    if isinstance(t, Inv):
        return term_vars(t.inner)
    return frozenset()


def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, Eq):
        return term_vars(f.lhs) | term_vars(f.rhs)
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, (And, Or, Implies)):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, (ForAll, Exists)):
        return free_vars(f.body) - {f.var}
    if isinstance(f, (Box, Dia)):
        return free_vars(f.body)
    raise TypeError(f"not a formula: {f!r}")


def all_vars(f: Formula) -> frozenset[str]:
    """Free and bound variable names appearing anywhere in f."""
    if isinstance(f, Eq):
        return term_vars(f.lhs) | term_vars(f.rhs)
    if isinstance(f, Not):
        return all_vars(f.body)
    if isinstance(f, (And, Or, Implies)):
        return all_vars(f.left) | all_vars(f.right)
    if isinstance(f, (ForAll, Exists)):
        return all_vars(f.body) | {f.var}
    if isinstance(f, (Box, Dia)):
        return all_vars(f.body)
    raise TypeError(f"not a formula: {f!r}")


def fresh_name(base: str, taken: frozenset[str] | set[str]) -> str:
    if base not in taken and base not in _KEYWORDS:
        return base
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


def _subst_term(t: Term, var: str, repl: Term) -> Term:
    if isinstance(t, Var):
        return repl if t.name == var else t
    if isinstance(t, Mul):
        return Mul(_subst_term(t.left, var, repl), _subst_term(t.right, var, repl))
    if isinstance(t, Inv):
        return Inv(_subst_term(t.inner, var, repl))
    return t


def substitute(f: Formula, var: str, repl: Term) -> Formula:
    """Capture-avoiding substitution of repl for free occurrences of var."""
    if isinstance(f, Eq):
        return Eq(_subst_term(f.lhs, var, repl), _subst_term(f.rhs, var, repl))
    if isinstance(f, Not):
        return Not(substitute(f.body, var, repl))
    if isinstance(f, (And, Or, Implies)):
        return type(f)(substitute(f.left, var, repl), substitute(f.right, var, repl))
    if isinstance(f, (Box, Dia)):
        return type(f)(substitute(f.body, var, repl))
    if isinstance(f, (ForAll, Exists)):
        if f.var == var:
            return f
        if f.var in term_vars(repl):
            renamed = fresh_name(f.var, all_vars(f.body) | term_vars(repl) | {var})
            body = substitute(f.body, f.var, Var(renamed))
            return type(f)(renamed, substitute(body, var, repl))
        return type(f)(f.var, substitute(f.body, var, repl))
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Rendering

_LEVEL_IMPLIES = 1
_LEVEL_OR = 2
_LEVEL_AND = 3
_LEVEL_NOT = 4


def render_term(t: Term, min_level: int = 0) -> str:
    # levels: Mul = 1, atoms = 2
    if isinstance(t, Ident):
        return "e"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Param):
        return f"${t.index}"
    if isinstance(t, Inv):
        return f"inv({render_term(t.inner)})"
    if isinstance(t, Mul):
        text = f"{render_term(t.left, 1)}*{render_term(t.right, 2)}"
        return f"({text})" if min_level > 1 else text
    raise TypeError(f"not a term: {t!r}")


def render(f: Formula, min_level: int = 0, tail: bool = True) -> str:
    """Concrete syntax for f; parse(render(f)) is structurally f."""
    if isinstance(f, (ForAll, Exists, Box, Dia)):
        if isinstance(f, ForAll):
            head = f"forall {f.var}"
        elif isinstance(f, Exists):
            head = f"exists {f.var}"
        elif isinstance(f, Box):
            head = "box"
        else:
            head = "dia"
        text = f"{head} {render(f.body, 0, True)}"
        return text if tail else f"({text})"
    if isinstance(f, Eq):
        return f"{render_term(f.lhs)} = {render_term(f.rhs)}"
    if isinstance(f, Not):
        return f"not {render(f.body, _LEVEL_NOT, tail)}"
    if isinstance(f, (And, Or, Implies)):
        if isinstance(f, And):
            op, lvl = "&", _LEVEL_AND
            left = render(f.left, lvl, False)
            right = render(f.right, lvl + 1, tail)
        elif isinstance(f, Or):
            op, lvl = "|", _LEVEL_OR
            left = render(f.left, lvl, False)
            right = render(f.right, lvl + 1, tail)
        else:
            op, lvl = "->", _LEVEL_IMPLIES
            left = render(f.left, lvl + 1, False)
            right = render(f.right, lvl, tail)
        text = f"{left} {op} {right}"
        return f"({text})" if lvl < min_level else text
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<param>\$[0-9]+)"
    r"|(?P<arrow>->)"
    r"|(?P<sym>[()=*&|])"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text:
            raise FormulaSyntaxError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return self.advance()

    def error(self, message: str):
        tok = self.peek()
        raise FormulaSyntaxError(message, tok.line, tok.col)

    # formula := prefix-to-end-of-scope | implication
    def parse_scope(self) -> Formula:
        tok = self.peek()
        if tok.text in ("forall", "exists"):
            self.advance()
            name = self.peek()
            if name.kind != "ident" or name.text in _KEYWORDS:
                self.error("expected a variable name after quantifier")
            self.advance()
            body = self.parse_scope()
            return (ForAll if tok.text == "forall" else Exists)(name.text, body)
        if tok.text in ("box", "dia"):
            self.advance()
            body = self.parse_scope()
            return (Box if tok.text == "box" else Dia)(body)
        return self.parse_implies()

    def parse_implies(self) -> Formula:
        left = self.parse_or()
        if self.peek().text == "->":
            self.advance()
            right = self.parse_scope()
            return Implies(left, right)
        return left

    def parse_or(self) -> Formula:
        out = self.parse_and()
        while self.peek().text == "|":
            self.advance()
            out = Or(out, self.parse_and())
        return out

    def parse_and(self) -> Formula:
        out = self.parse_not()
        while self.peek().text == "&":
            self.advance()
            out = And(out, self.parse_not())
        return out

    def parse_not(self) -> Formula:
        tok = self.peek()
        if tok.text == "not":
            self.advance()
            return Not(self.parse_not())
        if tok.text in ("forall", "exists", "box", "dia"):
            return self.parse_scope()
        return self.parse_atom()

    def parse_atom(self) -> Formula:
        if self.peek().text == "(":
            # Could open a parenthesized term or a parenthesized formula.
            saved = self.pos
            try:
                return self.parse_equation()
            except FormulaSyntaxError:
                self.pos = saved
            self.expect("(")
            body = self.parse_scope()
            self.expect(")")
            return body
        return self.parse_equation()

    def parse_equation(self) -> Formula:
        lhs = self.parse_term()
        self.expect("=")
        rhs = self.parse_term()
        return Eq(lhs, rhs)

    def parse_term(self) -> Term:
        out = self.parse_factor()
        while self.peek().text == "*":
            self.advance()
            out = Mul(out, self.parse_factor())
        return out

    def parse_factor(self) -> Term:
        tok = self.peek()
        if tok.text == "e":
            self.advance()
            return E
        if tok.text == "inv":
            self.advance()
            self.expect("(")
            inner = self.parse_term()
            self.expect(")")
            return Inv(inner)
        if tok.kind == "param":
            self.advance()
            return Param(int(tok.text[1:]))
        if tok.kind == "ident":
            if tok.text in _KEYWORDS:
                self.error(f"keyword {tok.text!r} cannot start a term")
            self.advance()
            return Var(tok.text)
        if tok.text == "(":
            self.advance()
            inner = self.parse_term()
            self.expect(")")
            return inner
        self.error("expected a term")


def parse_formula(text: str) -> Formula:
    """Parse one formula; free variables are allowed (parameters-to-be-bound)."""
    parser = _Parser(_tokenize(text))
    out = parser.parse_scope()
    tok = parser.peek()
    if tok.kind != "eof":
        raise FormulaSyntaxError(f"trailing input starting at {tok.text!r}", tok.line, tok.col)
    return out


def parse_formula_lines(text: str) -> list[Formula]:
    """Batch mode: one formula per nonempty line."""
    return [parse_formula(line) for line in text.splitlines() if line.strip()]


# ---------------------------------------------------------------------------
# Inverse elimination


def _term_has_inv(t: Term) -> bool:
    if isinstance(t, Inv):
        return True
    if isinstance(t, Mul):
        return _term_has_inv(t.left) or _term_has_inv(t.right)
    return False


def has_inverses(f: Formula) -> bool:
    if isinstance(f, Eq):
        return _term_has_inv(f.lhs) or _term_has_inv(f.rhs)
    if isinstance(f, Not):
        return has_inverses(f.body)
    if isinstance(f, (And, Or, Implies)):
        return has_inverses(f.left) or has_inverses(f.right)
    if isinstance(f, (ForAll, Exists, Box, Dia)):
        return has_inverses(f.body)
    raise TypeError(f"not a formula: {f!r}")


def _innermost_inv(t: Term) -> Inv | None:
    """Leftmost Inv node whose inner term is inverse-free."""
    if isinstance(t, Inv):
        inner = _innermost_inv(t.inner)
        if inner is not None:
            return inner
        if not _term_has_inv(t.inner):
            return t
        return None
    if isinstance(t, Mul):
        found = _innermost_inv(t.left)
        if found is not None:
            return found
        return _innermost_inv(t.right)
    return None


def _replace_term_once(t: Term, target: Term, repl: Term) -> tuple[Term, bool]:
    if t is target:
        return repl, True
    if isinstance(t, Mul):
        left, done = _replace_term_once(t.left, target, repl)
        if done:
            return Mul(left, t.right), True
        right, done = _replace_term_once(t.right, target, repl)
        return Mul(t.left, right), done
    if isinstance(t, Inv):
        inner, done = _replace_term_once(t.inner, target, repl)
        return Inv(inner), done
    return t, False


def _expand_first(f: Formula, positive: bool, taken: frozenset[str]) -> tuple[Formula, bool]:
    if isinstance(f, Eq):
        inv_node = _innermost_inv(f.lhs)
        side = "lhs"
        if inv_node is None:
            inv_node = _innermost_inv(f.rhs)
            side = "rhs"
        if inv_node is None:
            return f, False
        u = fresh_name("u", taken)
        guard = And(Eq(Mul(inv_node.inner, Var(u)), E), Eq(Mul(Var(u), inv_node.inner), E))
        if side == "lhs":
            new_term, done = _replace_term_once(f.lhs, inv_node, Var(u))
            atom = Eq(new_term, f.rhs)
        else:
            new_term, done = _replace_term_once(f.rhs, inv_node, Var(u))
            atom = Eq(f.lhs, new_term)
        if not done:
            raise InvariantError("inverse occurrence vanished during replacement")
        if positive:
            return Exists(u, And(guard, atom)), True
        return ForAll(u, Implies(guard, atom)), True
    if isinstance(f, Not):
        body, done = _expand_first(f.body, not positive, taken)
        return Not(body), done
    if isinstance(f, (And, Or)):
        left, done = _expand_first(f.left, positive, taken)
        if done:
            return type(f)(left, f.right), True
        right, done = _expand_first(f.right, positive, taken)
        return type(f)(f.left, right), done
    if isinstance(f, Implies):
        left, done = _expand_first(f.left, not positive, taken)
        if done:
            return Implies(left, f.right), True
        right, done = _expand_first(f.right, positive, taken)
        return Implies(f.left, right), done
    if isinstance(f, (ForAll, Exists, Box, Dia)):
        if isinstance(f, (ForAll, Exists)):
            body, done = _expand_first(f.body, positive, taken)
            return type(f)(f.var, body), done
        body, done = _expand_first(f.body, positive, taken)
        return type(f)(body), done
    raise TypeError(f"not a formula: {f!r}")


def expand_inverses(f: Formula) -> Formula:
    """Eliminate formal inverses via guarded fresh variables.

    Each occurrence inv(t) is replaced by a fresh u with the guard
    t*u = e & u*t = e, existentially in positive positions and
    universally in negative ones; the result is equivalent over groups.
    """
    out = f
    while has_inverses(out):
        out, done = _expand_first(out, True, all_vars(out))
        if not done:
            raise InvariantError("inverse elimination made no progress")
    return out


# ---------------------------------------------------------------------------
# Named builders


def _as_term(arg) -> Term:
    if isinstance(arg, Term):
        return arg
    if isinstance(arg, str):
        return Var(arg)
    raise BuilderError(f"expected a term or variable name, got {arg!r}")


def _commutes(t: Term, a: Term) -> Formula:
    return Eq(Mul(t, a), Mul(a, t))


def cyc_member(y, x) -> Formula:
    """y lies in the cyclic subgroup generated by x."""
    yt, xt = _as_term(y), _as_term(x)
    t = fresh_name("t", term_vars(yt) | term_vars(xt))
    tv = Var(t)
    return Box(ForAll(t, Implies(_commutes(tv, xt), _commutes(tv, yt))))


def tuple_member(y, *xs) -> Formula:
    """y lies in the subgroup generated by the tuple xs."""
    if not xs:
        raise BuilderError("tuple_member needs at least one generator")
    yt = _as_term(y)
    xts = [_as_term(x) for x in xs]
    taken = term_vars(yt)
    for xt in xts:
        taken |= term_vars(xt)
    t = fresh_name("t", taken)
    tv = Var(t)
    hyp = conj([_commutes(tv, xt) for xt in xts])
    return Box(ForAll(t, Implies(hyp, _commutes(tv, yt))))


def cyclic() -> Formula:
    return Exists("x", ForAll("y", cyc_member("y", "x")))


def n_generated(n: int) -> Formula:
    _check_positive(n)
    names = [f"x{i}" for i in range(1, n + 1)]
    body = ForAll("y", tuple_member("y", *names))
    for name in reversed(names):
        body = Exists(name, body)
    return body


_TAU0_EXPONENTS = (1, 2, 3, 4, 6)


def tau0(x) -> Formula:
    """x has order 1, 2, 3, 4, or 6, via x^k = e disjuncts."""
    xt = _as_term(x)
    return disj([Eq(power(xt, k), E) for k in _TAU0_EXPONENTS])


def ord_finite(x) -> Formula:
    """x is a torsion element."""
    xt = _as_term(x)
    y = fresh_name("y", term_vars(xt))
    yv = Var(y)
    branch = Exists(
        y,
        conj([neq(yv, xt), neq(Mul(xt, yv), E), cyc_member(xt, yv), cyc_member(yv, xt)]),
    )
    return Or(tau0(xt), branch)


def torsion_group() -> Formula:
    return ForAll("x", ord_finite("x"))


def p_divisible(x, p: int) -> Formula:
    """x has a p-th root, with y^p written as an explicit p-fold product."""
    _check_positive(p)
    xt = _as_term(x)
    y = fresh_name("y", term_vars(xt))
    return Exists(y, Eq(power(Var(y), p), xt))


def size_exactly(n: int) -> Formula:
    _check_positive(n)
    names = [f"x{i}" for i in range(1, n + 1)]
    parts: list[Formula] = [
        neq(Var(names[i]), Var(names[j])) for i in range(n) for j in range(i + 1, n)
    ]
    cover = ForAll("y", disj([Eq(Var("y"), Var(nm)) for nm in names]))
    body = cover if not parts else And(conj(parts), cover)
    for name in reversed(names):
        body = Exists(name, body)
    return body


def size_at_least(n: int) -> Formula:
    _check_positive(n)
    names = [f"x{i}" for i in range(1, n + 1)]
    parts = [neq(Var(names[i]), Var(names[j])) for i in range(n) for j in range(i + 1, n)]
    body: Formula = conj(parts) if parts else Eq(Var(names[0]), Var(names[0]))
    for name in reversed(names):
        body = Exists(name, body)
    return body


def _central(name: str, taken: frozenset[str]) -> Formula:
    t = fresh_name("t", taken | {name})
    return ForAll(t, _commutes(Var(t), Var(name)))


def center_trivial() -> Formula:
    return ForAll("x", Implies(_central("x", frozenset()), Eq(Var("x"), E)))


def center_exactly(n: int) -> Formula:
    _check_positive(n)
    names = [f"x{i}" for i in range(1, n + 1)]
    taken = frozenset(names) | {"y"}
    parts: list[Formula] = [_central(nm, taken) for nm in names]
    parts += [neq(Var(names[i]), Var(names[j])) for i in range(n) for j in range(i + 1, n)]
    cover = ForAll(
        "y", Implies(_central("y", taken), disj([Eq(Var("y"), Var(nm)) for nm in names]))
    )
    body = And(conj(parts), cover)
    for name in reversed(names):
        body = Exists(name, body)
    return body


def center_at_least(n: int) -> Formula:
    _check_positive(n)
    names = [f"x{i}" for i in range(1, n + 1)]
    taken = frozenset(names)
    parts: list[Formula] = [_central(nm, taken) for nm in names]
    parts += [neq(Var(names[i]), Var(names[j])) for i in range(n) for j in range(i + 1, n)]
    body = conj(parts)
    for name in reversed(names):
        body = Exists(name, body)
    return body


def _check_positive(n) -> None:
    if not isinstance(n, int) or n <= 0:
        raise BuilderError(f"expected a positive integer, got {n!r}")


_BUILDERS = {
    "cyc_member": cyc_member,
    "tuple_member": tuple_member,
    "cyclic": cyclic,
    "n_generated": n_generated,
    "tau0": tau0,
    "ord_finite": ord_finite,
    "torsion_group": torsion_group,
    "p_divisible": p_divisible,
    "size_exactly": size_exactly,
    "size_at_least": size_at_least,
    "center_trivial": center_trivial,
    "center_exactly": center_exactly,
    "center_at_least": center_at_least,
}


def builder_names() -> tuple[str, ...]:
    return tuple(sorted(_BUILDERS))


def build_named(name: str, *args) -> Formula:
    """Construct one of the fixed named formulas."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise BuilderError(f"unknown builder {name!r}") from None
    return builder(*args)
