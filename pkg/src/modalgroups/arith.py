"""First-order arithmetic over {+, *, 0, 1, =, |}: ASTs, the divisibility
definitions of squaring and multiplication, quantifier relativization to
the nonnegative integers, the group-language translations, and an exact
bounded evaluator over the integers.

The evaluator decides three fragments exactly, beyond plain scanning of
[-box, box]:

  * universals whose bound variable occurs only as the right side of
    divisibility atoms are decided by probing one representative per
    achievable divisibility profile (the lcm of each subset of divisors;
    any differing multiple would divide their product);
  * existential variables pinned by linear equations are enumerated from
    the solved candidates instead of scanned;
  * existential variables pinned by a same-multiples pattern (the s-side
    and t-side of an if-and-only-if over divisibility) get the two
    candidates with |value| equal to the lcm of the known side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import formulas as GF
from . import verdict as V
from .verdict import Verdict


class DialectError(ValueError):
    pass


class UnnormalizedAtomError(ValueError):
    pass


class ArithSyntaxError(ValueError):
    pass


# ---------------------------------------------------------------------------
# AST


class ATerm:
    __slots__ = ()


@dataclass(frozen=True)
class Zero(ATerm):
    pass


@dataclass(frozen=True)
class One(ATerm):
    pass


@dataclass(frozen=True)
class AVar(ATerm):
    name: str


@dataclass(frozen=True)
class Add(ATerm):
    left: ATerm
    right: ATerm


@dataclass(frozen=True)
class Times(ATerm):
    left: ATerm
    right: ATerm


@dataclass(frozen=True)
class Fn(ATerm):
    """Uninterpreted function application (word-code arithmetization)."""

    name: str
    args: tuple[ATerm, ...]


class AFormula:
    __slots__ = ()


@dataclass(frozen=True)
class AEq(AFormula):
    lhs: ATerm
    rhs: ATerm


@dataclass(frozen=True)
class Divides(AFormula):
    lhs: ATerm
    rhs: ATerm


@dataclass(frozen=True)
class Pred(AFormula):
    """Uninterpreted predicate application (word-code arithmetization)."""

    name: str
    args: tuple[ATerm, ...]


@dataclass(frozen=True)
class ANot(AFormula):
    body: AFormula


@dataclass(frozen=True)
class AAnd(AFormula):
    left: AFormula
    right: AFormula


@dataclass(frozen=True)
class AOr(AFormula):
    left: AFormula
    right: AFormula


@dataclass(frozen=True)
class AImplies(AFormula):
    left: AFormula
    right: AFormula


@dataclass(frozen=True)
class AIff(AFormula):
    left: AFormula
    right: AFormula


@dataclass(frozen=True)
class AForAll(AFormula):
    var: str
    body: AFormula


@dataclass(frozen=True)
class AExists(AFormula):
    var: str
    body: AFormula


ZERO = Zero()
ONE = One()


def a_conj(parts: list[AFormula]) -> AFormula:
    if not parts:
        raise ValueError("empty conjunction")
    out = parts[0]
    for p in parts[1:]:
        out = AAnd(out, p)
    return out


def numeral(n: int) -> ATerm:
    """n as a balanced sum of 0s and 1s."""
    if n < 0:
        raise ValueError("numerals are nonnegative")
    if n == 0:
        return ZERO
    if n == 1:
        return ONE
    half = n // 2
    return Add(numeral(n - half), numeral(half))


def aterm_vars(t: ATerm) -> frozenset[str]:
    if isinstance(t, AVar):
        return frozenset({t.name})
    if isinstance(t, (Add, Times)):
        return aterm_vars(t.left) | aterm_vars(t.right)
    if isinstance(t, Fn):
        out = frozenset()
        for a in t.args:
            out |= aterm_vars(a)
        return out
    return frozenset()


def afree_vars(f: AFormula) -> frozenset[str]:
    if isinstance(f, (AEq, Divides)):
        return aterm_vars(f.lhs) | aterm_vars(f.rhs)
    if isinstance(f, Pred):
        out = frozenset()
        for a in f.args:
            out |= aterm_vars(a)
        return out
    if isinstance(f, ANot):
        return afree_vars(f.body)
    if isinstance(f, (AAnd, AOr, AImplies, AIff)):
        return afree_vars(f.left) | afree_vars(f.right)
    if isinstance(f, (AForAll, AExists)):
        return afree_vars(f.body) - {f.var}
    raise TypeError(f"not an arithmetic formula: {f!r}")


def aall_vars(f: AFormula) -> frozenset[str]:
    if isinstance(f, (AEq, Divides, Pred)):
        return afree_vars(f)
    if isinstance(f, ANot):
        return aall_vars(f.body)
    if isinstance(f, (AAnd, AOr, AImplies, AIff)):
        return aall_vars(f.left) | aall_vars(f.right)
    if isinstance(f, (AForAll, AExists)):
        return aall_vars(f.body) | {f.var}
    raise TypeError(f"not an arithmetic formula: {f!r}")


def _subst_aterm(t: ATerm, mapping: dict[str, ATerm]) -> ATerm:
    if isinstance(t, AVar):
        return mapping.get(t.name, t)
    if isinstance(t, (Add, Times)):
        return type(t)(_subst_aterm(t.left, mapping), _subst_aterm(t.right, mapping))
    if isinstance(t, Fn):
        return Fn(t.name, tuple(_subst_aterm(a, mapping) for a in t.args))
    return t


def subst_arith(f: AFormula, mapping: dict[str, ATerm]) -> AFormula:
    """Simultaneous substitution; bound variables must not collide with the
    mapping (callers rename first)."""
    if isinstance(f, (AEq, Divides)):
        return type(f)(_subst_aterm(f.lhs, mapping), _subst_aterm(f.rhs, mapping))
    if isinstance(f, Pred):
        return Pred(f.name, tuple(_subst_aterm(a, mapping) for a in f.args))
    if isinstance(f, ANot):
        return ANot(subst_arith(f.body, mapping))
    if isinstance(f, (AAnd, AOr, AImplies, AIff)):
        return type(f)(subst_arith(f.left, mapping), subst_arith(f.right, mapping))
    if isinstance(f, (AForAll, AExists)):
        if f.var in mapping:
            raise ValueError(f"substitution collides with bound {f.var!r}")
        for t in mapping.values():
            if f.var in aterm_vars(t):
                raise ValueError(f"substitution would capture {f.var!r}")
        return type(f)(f.var, subst_arith(f.body, mapping))
    raise TypeError(f"not an arithmetic formula: {f!r}")


# ---------------------------------------------------------------------------
# Dialects


def dialect_of(f: AFormula) -> str:
    uses_times = uses_div = uses_pred = False

    def walk_term(t: ATerm):
        nonlocal uses_times, uses_pred
        if isinstance(t, Times):
            uses_times = True
            walk_term(t.left)
            walk_term(t.right)
        elif isinstance(t, Add):
            walk_term(t.left)
            walk_term(t.right)
        elif isinstance(t, Fn):
            uses_pred = True
            for a in t.args:
                walk_term(a)

    def walk(g: AFormula):
        nonlocal uses_div, uses_pred
        if isinstance(g, AEq):
            walk_term(g.lhs)
            walk_term(g.rhs)
        elif isinstance(g, Divides):
            uses_div = True
            walk_term(g.lhs)
            walk_term(g.rhs)
        elif isinstance(g, Pred):
            uses_pred = True
            for a in g.args:
                walk_term(a)
        elif isinstance(g, ANot):
            walk(g.body)
        elif isinstance(g, (AAnd, AOr, AImplies, AIff)):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, (AForAll, AExists)):
            walk(g.body)

    walk(f)
    if uses_pred:
        return "full"
    if uses_times and uses_div:
        return "full"
    if uses_times:
        return "ring"
    return "presburger-div"


def ensure_dialect(f: AFormula, dialect: str) -> None:
    actual = dialect_of(f)
    allowed = {
        "presburger-div": {"presburger-div"},
        "ring": {"ring", "presburger-div"},
        "full": {"full", "ring", "presburger-div"},
    }
    if dialect not in allowed:
        raise DialectError(f"unknown dialect {dialect!r}")
    if actual not in allowed[dialect]:
        raise DialectError(f"formula is {actual}, expected {dialect}")


# ---------------------------------------------------------------------------
# The fixed divisibility-language formulas


def _sigma_body(x: ATerm, y: ATerm, u: str, t: str, z: str) -> AFormula:
    uv, tv, zv = AVar(u), AVar(t), AVar(z)
    same_mult_1 = AForAll(
        z,
        AIff(AAnd(Divides(x, zv), Divides(Add(x, ONE), zv)), Divides(Add(y, x), zv)),
    )
    same_mult_2 = AForAll(
        z, AIff(AAnd(Divides(x, zv), Divides(uv, zv)), Divides(tv, zv))
    )
    matrix = a_conj(
        [AEq(Add(uv, ONE), x), AEq(Add(x, tv), y), same_mult_1, same_mult_2]
    )
    return AExists(u, AExists(t, matrix))


def sigma_formula() -> AFormula:
    """sigma(x, y): y is the square of x, in the divisibility language."""
    return _sigma_body(AVar("x"), AVar("y"), "u", "t", "z")


def sigma_applied(x: ATerm, y: ATerm, suffix: str) -> AFormula:
    """sigma with its bound variables renamed by suffix, applied to terms."""
    return _sigma_body(x, y, f"u{suffix}", f"t{suffix}", f"z{suffix}")


def mu_formula() -> AFormula:
    """mu(x, y, z): z is the product of x and y, via three squarings."""
    x, y, z = AVar("x"), AVar("y"), AVar("z")
    u, vv, w = AVar("u"), AVar("v"), AVar("w")
    matrix = a_conj(
        [
            sigma_applied(x, u, "1"),
            sigma_applied(y, vv, "2"),
            sigma_applied(Add(x, y), w, "3"),
            AEq(Add(Add(Add(z, z), u), vv), w),
        ]
    )
    return AExists("u", AExists("v", AExists("w", matrix)))


def mu_applied(x: ATerm, y: ATerm, z: ATerm, suffix: str) -> AFormula:
    u, vv, w = f"u{suffix}", f"v{suffix}", f"w{suffix}"
    matrix = a_conj(
        [
            sigma_applied(x, AVar(u), f"{suffix}a"),
            sigma_applied(y, AVar(vv), f"{suffix}b"),
            sigma_applied(Add(x, y), AVar(w), f"{suffix}c"),
            AEq(Add(Add(Add(z, z), AVar(u)), AVar(vv)), AVar(w)),
        ]
    )
    return AExists(u, AExists(vv, AExists(w, matrix)))


# ---------------------------------------------------------------------------
# Relativization of quantifiers to the nonnegative integers


def nat_relativize(f: AFormula, code: int | None = None) -> AFormula:
    """Read a ring sentence over the nonnegative integers as one over all
    integers: relativize quantifiers to sums of four squares and prepend a
    numeral tag recording the sentence's code."""
    ensure_dialect(f, "ring")
    if afree_vars(f):
        raise DialectError("relativization expects a sentence")
    if code is None:
        from .coding import encode_arith_sentence

        code = encode_arith_sentence(f).value
    counter = [0]

    def nat_guard(name: str) -> AFormula:
        counter[0] += 1
        k = counter[0]
        a, b, c, d = (AVar(f"q{k}{ch}") for ch in "abcd")
        total = Add(Add(Add(Times(a, a), Times(b, b)), Times(c, c)), Times(d, d))
        guard: AFormula = AEq(AVar(name), total)
        for nm in (f"q{k}d", f"q{k}c", f"q{k}b", f"q{k}a"):
            guard = AExists(nm, guard)
        return guard

    def walk(g: AFormula) -> AFormula:
        if isinstance(g, (AEq, Divides, Pred)):
            return g
        if isinstance(g, ANot):
            return ANot(walk(g.body))
        if isinstance(g, (AAnd, AOr, AImplies, AIff)):
            return type(g)(walk(g.left), walk(g.right))
        if isinstance(g, AExists):
            return AExists(g.var, AAnd(nat_guard(g.var), walk(g.body)))
        if isinstance(g, AForAll):
            return AForAll(g.var, AImplies(nat_guard(g.var), walk(g.body)))
        raise TypeError(f"not an arithmetic formula: {g!r}")

    tag = AEq(numeral(code), numeral(code))
    return AAnd(tag, walk(f))


# ---------------------------------------------------------------------------
# Atom normalizer

_NORMAL_RHS = (Zero, One)


def _is_normal_atom(f: AFormula) -> bool:
    if isinstance(f, Divides):
        return isinstance(f.lhs, AVar) and isinstance(f.rhs, AVar)
    if not isinstance(f, AEq):
        return False
    l, r = f.lhs, f.rhs
    if isinstance(l, AVar) and isinstance(r, (AVar, Zero, One)):
        return True
    if (
        isinstance(l, Add)
        and isinstance(l.left, AVar)
        and isinstance(l.right, AVar)
        and isinstance(r, AVar)
    ):
        return True
    return False


def normalize_atoms(f: AFormula) -> AFormula:
    """Rewrite all atoms to the forms x+y=z, x=y, x|y, x=0, x=1.

    Compound subterms are named by fresh existential variables whose
    defining equations pin them uniquely, so the definitions may be hoisted
    to the nearest quantifier whose variable they mention (keeping the
    divisibility universals in pure-variable shape)."""
    ensure_dialect(f, "presburger-div")
    taken = set(aall_vars(f))
    counter = [0]
    # identical definitions built from unambiguous names are emitted once;
    # anything touching a quantified variable stays per-occurrence
    shared: dict = {}
    shareable = set(afree_vars(f))

    def fresh() -> str:
        while True:
            counter[0] += 1
            name = f"w{counter[0]}"
            if name not in taken:
                taken.add(name)
                return name

    def name_term(t: ATerm, defs: list) -> AVar:
        if isinstance(t, AVar):
            return t
        if isinstance(t, (Zero, One)):
            key = ("const", type(t).__name__)
            if key in shared:
                return AVar(shared[key])
            w = fresh()
            shared[key] = w
            shareable.add(w)
            defs.append((w, AEq(AVar(w), t), aterm_vars(t)))
            return AVar(w)
        if isinstance(t, Add):
            la = name_term(t.left, defs)
            ra = name_term(t.right, defs)
            key = ("add", la.name, ra.name)
            can_share = la.name in shareable and ra.name in shareable
            if can_share and key in shared:
                return AVar(shared[key])
            w = fresh()
            if can_share:
                shared[key] = w
                shareable.add(w)
            defs.append((w, AEq(Add(la, ra), AVar(w)), {la.name, ra.name}))
            return AVar(w)
        raise UnnormalizedAtomError(f"cannot normalize term {t!r}")

    def norm_atom(g: AFormula, defs: list) -> AFormula:
        if isinstance(g, Divides):
            return Divides(name_term(g.lhs, defs), name_term(g.rhs, defs))
        if isinstance(g, AEq):
            l, r = g.lhs, g.rhs
            if isinstance(r, (Zero, One)) and not isinstance(l, (Zero, One)):
                return AEq(name_term(l, defs), r)
            if isinstance(l, (Zero, One)) and not isinstance(r, (Zero, One)):
                return AEq(name_term(r, defs), l)
            if isinstance(l, Add) and not isinstance(r, Add):
                la = name_term(l.left, defs)
                ra = name_term(l.right, defs)
                return AEq(Add(la, ra), name_term(r, defs))
            if isinstance(r, Add) and not isinstance(l, Add):
                la = name_term(r.left, defs)
                ra = name_term(r.right, defs)
                return AEq(Add(la, ra), name_term(l, defs))
            return AEq(name_term(l, defs), name_term(r, defs))
        raise TypeError(f"not an atom: {g!r}")

    def wrap(defs: list, body: AFormula) -> AFormula:
        for w, atom, _ in reversed(defs):
            body = AExists(w, AAnd(atom, body))
        return body

    def walk(g: AFormula) -> tuple[AFormula, list]:
        if isinstance(g, (AEq, Divides)):
            defs: list = []
            atom = g if _is_normal_atom(g) else norm_atom(g, defs)
            return atom, defs
        if isinstance(g, Pred):
            raise DialectError("predicate atoms cannot be normalized")
        if isinstance(g, ANot):
            body, defs = walk(g.body)
            return ANot(body), defs
        if isinstance(g, (AAnd, AOr, AImplies, AIff)):
            lf, ld = walk(g.left)
            rf, rd = walk(g.right)
            return type(g)(lf, rf), ld + rd
        if isinstance(g, (AForAll, AExists)):
            body, defs = walk(g.body)
            # a definition stays inside when it mentions the bound variable
            # or, transitively, another definition that stays inside
            forced = {g.var}
            changed = True
            while changed:
                changed = False
                for name, _, used in defs:
                    if name not in forced and used & forced:
                        forced.add(name)
                        changed = True
            inside = [d for d in defs if d[0] in forced]
            outside = [d for d in defs if d[0] not in forced]
            return type(g)(g.var, wrap(inside, body)), outside
        raise TypeError(f"not an arithmetic formula: {g!r}")

    out, defs = walk(f)
    return wrap(defs, out)


# ---------------------------------------------------------------------------
# Translations into the modal group language


def translate_star(f: AFormula, param: str = "g") -> GF.Formula:
    """Interpret a normalized divisibility-language formula inside the
    cyclic subgroup generated by the parameter: integers become powers of
    the parameter, addition becomes the group product, divisibility becomes
    cyclic-subgroup membership, and quantifiers are guarded to the copy of
    the integers."""
    ensure_dialect(f, "presburger-div")
    if param in aall_vars(f):
        raise DialectError(f"parameter name {param!r} collides with a variable")

    def term(t: ATerm) -> GF.Term:
        if isinstance(t, AVar):
            return GF.Var(t.name)
        raise UnnormalizedAtomError(f"unexpected term {t!r} in normalized atom")

    def walk(g: AFormula) -> GF.Formula:
        if isinstance(g, AEq):
            l, r = g.lhs, g.rhs
            if isinstance(r, Zero):
                return GF.Eq(term(l), GF.E)
            if isinstance(r, One):
                return GF.Eq(term(l), GF.Var(param))
            if isinstance(l, Add):
                return GF.Eq(GF.Mul(term(l.left), term(l.right)), term(r))
            return GF.Eq(term(l), term(r))
        if isinstance(g, Divides):
            return GF.cyc_member(term(g.rhs), term(g.lhs))
        if isinstance(g, ANot):
            return GF.Not(walk(g.body))
        if isinstance(g, AAnd):
            return GF.And(walk(g.left), walk(g.right))
        if isinstance(g, AOr):
            return GF.Or(walk(g.left), walk(g.right))
        if isinstance(g, AImplies):
            return GF.Implies(walk(g.left), walk(g.right))
        if isinstance(g, AIff):
            return GF.And(
                GF.Implies(walk(g.left), walk(g.right)),
                GF.Implies(walk(g.right), walk(g.left)),
            )
        if isinstance(g, AExists):
            guard = GF.cyc_member(g.var, param)
            return GF.Exists(g.var, GF.And(guard, walk(g.body)))
        if isinstance(g, AForAll):
            guard = GF.cyc_member(g.var, param)
            return GF.ForAll(g.var, GF.Implies(guard, walk(g.body)))
        raise UnnormalizedAtomError(f"unexpected node {g!r}")

    return walk(f)


def eliminate_times(f: AFormula) -> AFormula:
    """Rewrite a ring formula into the divisibility language: flatten atoms
    so products appear as x*y = z, then replace each by the multiplication
    formula."""
    ensure_dialect(f, "ring")
    taken = set(aall_vars(f))
    counter = [0]

    def fresh() -> str:
        while True:
            counter[0] += 1
            name = f"m{counter[0]}"
            if name not in taken:
                taken.add(name)
                return name

    def name_term(t: ATerm, defs: list) -> ATerm:
        # returns a Times-free term; products become fresh pinned variables
        if isinstance(t, (AVar, Zero, One)):
            return t
        if isinstance(t, Add):
            return Add(name_term(t.left, defs), name_term(t.right, defs))
        if isinstance(t, Times):
            la = name_term(t.left, defs)
            ra = name_term(t.right, defs)
            w = fresh()
            defs.append((w, mu_applied(la, ra, AVar(w), w)))
            return AVar(w)
        raise DialectError(f"cannot eliminate products from {t!r}")

    def wrap(defs: list, body: AFormula) -> AFormula:
        for w, def_f in reversed(defs):
            body = AExists(w, AAnd(def_f, body))
        return body

    def walk(g: AFormula) -> AFormula:
        if isinstance(g, (AEq, Divides)):
            defs: list = []
            atom = type(g)(name_term(g.lhs, defs), name_term(g.rhs, defs))
            return wrap(defs, atom)
        if isinstance(g, ANot):
            return ANot(walk(g.body))
        if isinstance(g, (AAnd, AOr, AImplies, AIff)):
            return type(g)(walk(g.left), walk(g.right))
        if isinstance(g, (AForAll, AExists)):
            return type(g)(g.var, walk(g.body))
        raise TypeError(f"not an arithmetic formula: {g!r}")

    return walk(f)


def translate_dagger(f: AFormula) -> GF.Formula:
    """Full parameter-free translation of a ring sentence: eliminate
    products, normalize, interpret over a fresh infinite-order parameter,
    and close under one possibility operator."""
    ensure_dialect(f, "ring")
    if afree_vars(f):
        raise DialectError("the parameter-free translation expects a sentence")
    div_form = normalize_atoms(eliminate_times(f))
    param = GF.fresh_name("x", aall_vars(div_form))
    matrix = translate_star(div_form, param)
    return GF.Dia(GF.Exists(param, GF.And(GF.Not(GF.ord_finite(param)), matrix)))


# ---------------------------------------------------------------------------
# Exact bounded evaluation over the integers


def _lcm_star(values) -> int:
    """lcm with the multiples-of-zero convention: any zero forces zero."""
    out = 1
    for v in values:
        if v == 0:
            return 0
        out = out // math.gcd(out, abs(v)) * abs(v)
    return out


_AFREE_CACHE: dict[int, tuple[AFormula, frozenset[str], tuple[str, ...]]] = {}
_STRUCT_CACHE: dict = {}


def _afree_cached(f: AFormula) -> frozenset[str]:
    hit = _AFREE_CACHE.get(id(f))
    if hit is not None and hit[0] is f:
        return hit[1]
    out = afree_vars(f)
    _AFREE_CACHE[id(f)] = (f, out, tuple(sorted(out)))
    return out


def _afree_sorted(f: AFormula) -> tuple[str, ...]:
    hit = _AFREE_CACHE.get(id(f))
    if hit is not None and hit[0] is f:
        return hit[2]
    _afree_cached(f)
    return _AFREE_CACHE[id(f)][2]


def _divides(a: int, b: int) -> bool:
    if a == 0:
        return b == 0
    return b % a == 0


class _DivEvaluator:
    def __init__(self, box: int, box_sufficient: bool):
        self.box = box
        self.box_sufficient = box_sufficient
        self.memo: dict = {}

    # terms -------------------------------------------------------------

    def term(self, t: ATerm, env: dict[str, int]) -> int:
        if isinstance(t, Zero):
            return 0
        if isinstance(t, One):
            return 1
        if isinstance(t, AVar):
            try:
                return env[t.name]
            except KeyError:
                raise DialectError(f"unassigned variable {t.name!r}") from None
        if isinstance(t, Add):
            return self.term(t.left, env) + self.term(t.right, env)
        if isinstance(t, Times):
            return self.term(t.left, env) * self.term(t.right, env)
        raise DialectError(f"cannot evaluate term {t!r}")

    # pin machinery -------------------------------------------------------
    #
    # A pin for an existential variable is a finite set of values that any
    # satisfying assignment must take, derived from conjuncts of the
    # matrix: linear equations solve directly, and the same-multiples
    # divisibility patterns force |value| to be the lcm of the known side.
    # Pins make those quantifiers exact, independent of the box.

    _COMBO_CAP = 64

    def _matrix_conjuncts_cached(self, f: AFormula) -> list:
        """Conjuncts of the matrix as (formula, inner-existential names).

        Conjuncts under inner existential prefixes are kept: those variables
        become fixpoint unknowns for pin chains.  Conjuncts mentioning a
        universally bound variable are dropped (except the universals
        themselves, which the pattern rules inspect whole)."""
        hit = _STRUCT_CACHE.get(("conj", id(f)))
        if hit is not None and hit[0] is f:
            return hit[1]
        out = self._matrix_conjuncts(f, frozenset(), frozenset())
        _STRUCT_CACHE[("conj", id(f))] = (f, out)
        return out

    def _matrix_conjuncts(self, f, forall_bound, exists_bound) -> list:
        out: list = []
        if isinstance(f, AAnd):
            out += self._matrix_conjuncts(f.left, forall_bound, exists_bound)
            out += self._matrix_conjuncts(f.right, forall_bound, exists_bound)
            return out
        free = _afree_cached(f)
        if not (free & forall_bound) and isinstance(f, (AEq, AForAll)):
            out.append((f, free & exists_bound))
        if isinstance(f, AForAll):
            out += self._matrix_conjuncts(f.body, forall_bound | {f.var}, exists_bound)
        elif isinstance(f, AExists):
            out += self._matrix_conjuncts(f.body, forall_bound, exists_bound | {f.var})
        return out

    def _linear_multi(self, t: ATerm, var: str, env, resolved):
        """Representations of t as coeff*var + const, one per combination of
        resolved candidate values; None when t is not linear in var."""
        if isinstance(t, AVar):
            if t.name == var:
                return [(1, 0)]
            if t.name in env:
                return [(0, env[t.name])]
            if t.name in resolved:
                return [(0, v) for v in resolved[t.name]]
            return None
        if isinstance(t, Zero):
            return [(0, 0)]
        if isinstance(t, One):
            return [(0, 1)]
        if isinstance(t, Add):
            l = self._linear_multi(t.left, var, env, resolved)
            r = self._linear_multi(t.right, var, env, resolved)
            if l is None or r is None or len(l) * len(r) > self._COMBO_CAP:
                return None
            return [(cl + cr, kl + kr) for cl, kl in l for cr, kr in r]
        return None

    def _term_candidates(self, t: ATerm, env, resolved):
        reps = self._linear_multi(t, "", env, resolved)
        if reps is None or any(c != 0 for c, _ in reps):
            return None
        return sorted(set(k for _, k in reps))

    def _unresolved_vars(self, f: AFormula, env, resolved):
        return [v for v in sorted(afree_vars(f)) if v not in env and v not in resolved]

    @staticmethod
    def _const_value(t: ATerm):
        if isinstance(t, Zero):
            return 0
        if isinstance(t, One):
            return 1
        if isinstance(t, Add):
            l = _DivEvaluator._const_value(t.left)
            r = _DivEvaluator._const_value(t.right)
            if l is None or r is None:
                return None
            return l + r
        return None

    def _strip_unit_guard(self, body: AFormula, zvar: str) -> AFormula:
        if isinstance(body, AImplies) and isinstance(body.left, Divides):
            d = body.left
            if isinstance(d.rhs, AVar) and d.rhs.name == zvar:
                if self._const_value(d.lhs) in (1, -1):
                    return body.right
        return body

    def _flatten_div_conj(self, f: AFormula, zvar: str):
        if isinstance(f, AAnd):
            l = self._flatten_div_conj(f.left, zvar)
            r = self._flatten_div_conj(f.right, zvar)
            if l is None or r is None:
                return None
            return l + r
        if isinstance(f, Divides) and isinstance(f.rhs, AVar) and f.rhs.name == zvar:
            return [f.lhs]
        return None

    def _pattern_sides(self, conjunct: AFormula):
        """For a same-multiples universal, the (known-side terms, other
        side's term).  Recognizes both the if-and-only-if shape and its
        two-implication translation."""
        hit = _STRUCT_CACHE.get(("sides", id(conjunct)))
        if hit is not None and hit[0] is conjunct:
            return hit[1]
        out = self._pattern_sides_raw(conjunct)
        _STRUCT_CACHE[("sides", id(conjunct))] = (conjunct, out)
        return out

    def _pattern_sides_raw(self, conjunct: AFormula):
        if not isinstance(conjunct, AForAll):
            return None
        z = conjunct.var
        body = self._strip_unit_guard(conjunct.body, z)
        if isinstance(body, AIff):
            left, right = body.left, body.right
        elif (
            isinstance(body, AAnd)
            and isinstance(body.left, AImplies)
            and isinstance(body.right, AImplies)
            and body.left.left == body.right.right
            and body.left.right == body.right.left
        ):
            left, right = body.left.left, body.left.right
        else:
            return None
        lhs = self._flatten_div_conj(left, z)
        rhs = self._flatten_div_conj(right, z)
        if lhs is None or rhs is None:
            return None
        if len(rhs) == 1:
            return lhs, rhs[0]
        if len(lhs) == 1:
            return rhs, lhs[0]
        return None

    def _solve_multi(self, reps, targets):
        out = set()
        for coeff, const in reps:
            if coeff == 0:
                continue
            for goal in targets:
                num = goal - const
                if num % coeff == 0:
                    out.add(num // coeff)
        return sorted(out)

    def _pin(self, var: str, body: AFormula, env):
        """Candidate values for var, or None when nothing pins it."""
        key = ("pin", id(body), var, tuple(env.get(v) for v in _afree_sorted(body)))
        hit = self.memo.get(key)
        if hit is not None:
            return hit[0]
        out = self._pin_raw(var, body, env)
        self.memo[key] = (out,)
        return out

    def _pin_raw(self, var: str, body: AFormula, env):
        # inner existential names that shadow an outer binding are ambiguous
        conjuncts = [
            c
            for c, inner in self._matrix_conjuncts_cached(body)
            if not (inner & env.keys()) and var not in inner
        ]
        resolved: dict[str, list[int]] = {}
        for _ in range(12):
            if var in resolved:
                return tuple(resolved[var])
            progress = False
            for c in conjuncts:
                if isinstance(c, AEq):
                    unres = self._unresolved_vars(c, env, resolved)
                    if len(unres) != 1:
                        continue
                    tv = unres[0]
                    l = self._linear_multi(c.lhs, tv, env, resolved)
                    r = self._linear_multi(c.rhs, tv, env, resolved)
                    if l is None or r is None or len(l) * len(r) > self._COMBO_CAP:
                        continue
                    reps = [
                        (cl - cr, kl - kr) for cl, kl in l for cr, kr in r
                    ]
                    if all(c0 == 0 for c0, _ in reps):
                        continue
                    resolved[tv] = self._solve_multi(reps, [0])
                    progress = True
                elif isinstance(c, AForAll):
                    sides = self._pattern_sides(c)
                    if sides is None:
                        continue
                    a_terms, c_term = sides
                    unres = [
                        v
                        for v in sorted(aterm_vars(c_term))
                        if v not in env and v not in resolved
                    ]
                    if len(unres) != 1:
                        continue
                    tv = unres[0]
                    known = []
                    ok = True
                    for t in a_terms:
                        vals = self._term_candidates(t, env, resolved)
                        if vals is None:
                            ok = False
                            break
                        known.append(vals)
                    if not ok:
                        continue
                    reps = self._linear_multi(c_term, tv, env, resolved)
                    if reps is None:
                        continue
                    targets = set()
                    combos = [[]]
                    for vals in known:
                        combos = [c0 + [v] for c0 in combos for v in vals]
                        if len(combos) > self._COMBO_CAP:
                            combos = combos[: self._COMBO_CAP]
                    for combo in combos:
                        L = _lcm_star(combo)
                        targets.update((L, -L))
                    resolved[tv] = self._solve_multi(reps, sorted(targets))
                    progress = True
            if not progress:
                break
        if var in resolved:
            return tuple(resolved[var])
        return None

    # probe decision for divisibility-only universals ---------------------

    def _divisor_only(self, body: AFormula, zvar: str, env):
        """Divisor values when zvar occurs only as the right side of
        divisibility atoms with zvar-free left terms; None otherwise."""
        terms = self._divisor_terms(body, zvar)
        if terms is None:
            return None
        try:
            return [self.term(t, env) for t in terms]
        except DialectError:
            return None

    def _divisor_terms(self, body: AFormula, zvar: str):
        hit = _STRUCT_CACHE.get(("divt", id(body)))
        if hit is not None and hit[0] is body:
            return hit[1]
        out = self._divisor_terms_raw(body, zvar)
        _STRUCT_CACHE[("divt", id(body))] = (body, out)
        return out

    def _divisor_terms_raw(self, body: AFormula, zvar: str):
        terms = []

        def walk(g: AFormula) -> bool:
            if isinstance(g, Divides):
                if isinstance(g.rhs, AVar) and g.rhs.name == zvar:
                    if zvar in aterm_vars(g.lhs):
                        return False
                    terms.append(g.lhs)
                    return True
                return zvar not in afree_vars(g)
            if isinstance(g, (AEq, Pred)):
                return zvar not in afree_vars(g)
            if isinstance(g, ANot):
                return walk(g.body)
            if isinstance(g, (AAnd, AOr, AImplies, AIff)):
                return walk(g.left) and walk(g.right)
            if isinstance(g, (AForAll, AExists)):
                if g.var == zvar:
                    return True
                return walk(g.body)
            return False

        if not walk(body):
            return None
        distinct = []
        for t in terms:
            if t not in distinct:
                distinct.append(t)
        if len(distinct) > 8:
            return None
        return distinct

    def _probe_universal(self, f: AForAll, env, divisors) -> Verdict:
        # one probe per achievable divisibility profile: the lcm of each
        # subset of divisors (a differing multiple would divide the product)
        probes = {1}
        values = sorted(set(abs(d) for d in divisors))
        subsets = [[]]
        for v in values:
            subsets += [s + [v] for s in subsets]
        for s in subsets:
            probes.add(_lcm_star(s))
        results = []
        for z in sorted(probes):
            env[f.var] = z
            results.append(self.eval(f.body, env))
            del env[f.var]
        return V.all_of(results, self.box)

    # main recursion -------------------------------------------------------

    def eval(self, f: AFormula, env: dict[str, int]) -> Verdict:
        if isinstance(f, AEq):
            return V.true() if self.term(f.lhs, env) == self.term(f.rhs, env) else V.false()
        if isinstance(f, Divides):
            return (
                V.true()
                if _divides(self.term(f.lhs, env), self.term(f.rhs, env))
                else V.false()
            )
        if isinstance(f, Pred):
            raise DialectError("predicate atoms have no integer semantics")
        if isinstance(f, ANot):
            return V.negate(self.eval(f.body, env))
        if isinstance(f, AAnd):
            return V.all_of((self.eval(g, env) for g in (f.left, f.right)), self.box)
        if isinstance(f, AOr):
            return V.any_of((self.eval(g, env) for g in (f.left, f.right)), self.box)
        if isinstance(f, AImplies):
            return V.implies(self.eval(f.left, env), self.eval(f.right, env), self.box)
        if isinstance(f, AIff):
            a = self.eval(f.left, env)
            b = self.eval(f.right, env)
            return V.all_of(
                [V.implies(a, b, self.box), V.implies(b, a, self.box)], self.box
            )
        if isinstance(f, (AForAll, AExists)):
            key = (id(f), tuple(env[v] for v in _afree_sorted(f)))
            hit = self.memo.get(key)
            if hit is not None:
                return hit
            out = self._eval_quantifier(f, env)
            self.memo[key] = out
            return out
        raise TypeError(f"not an arithmetic formula: {f!r}")

    def _eval_quantifier(self, f, env: dict[str, int]) -> Verdict:
        if isinstance(f, AForAll):
            divisors = self._divisor_only(f.body, f.var, env)
            if divisors is not None:
                return self._probe_universal(f, env, divisors)
            pins = self._pin(f.var, f.body, env)
            if pins is not None:
                # pinned conjunct fails off-candidates, so probe one there
                probe = (max(pins) + 1) if pins else 0
                env[f.var] = probe
                outside = self.eval(f.body, env)
                del env[f.var]
                if outside.is_false:
                    return outside
            return self._scan(f, env, is_forall=True)
        if isinstance(f, AExists):
            pins = self._pin(f.var, f.body, env)
            if pins is not None:
                results = []
                for val in pins:
                    env[f.var] = val
                    results.append(self.eval(f.body, env))
                    del env[f.var]
                return V.any_of(results, self.box)
            return self._scan(f, env, is_forall=False)
        raise TypeError(f"not a quantifier: {f!r}")

    def _scan(self, f, env, is_forall: bool) -> Verdict:
        saw_unknown = False
        for val in range(-self.box, self.box + 1):
            env[f.var] = val
            got = self.eval(f.body, env)
            del env[f.var]
            if is_forall and got.is_false:
                return got
            if not is_forall and got.is_true:
                return got
            if got.is_unknown:
                saw_unknown = True
        if saw_unknown or not self.box_sufficient:
            return V.unknown(self.box)
        return V.true() if is_forall else V.false()


def eval_div_Z(
    f: AFormula,
    assignment: dict[str, int] | None = None,
    box: int = 50,
    box_sufficient: bool = False,
    evaluator: "_DivEvaluator | None" = None,
) -> Verdict:
    """Evaluate over the integers with quantifiers confined to [-box, box],
    except for the exactly-decided fragments (divisibility-profile
    universals and pinned variables).  With box_sufficient the caller
    asserts the box decides the remaining quantifiers, so exhausted scans
    return definite verdicts instead of Unknown.  Pass a reused evaluator
    to share subformula verdicts across a grid of assignments."""
    if dialect_of(f) == "full":
        raise DialectError("predicate-extended formulas have no integer semantics")
    ev = evaluator or _DivEvaluator(box, box_sufficient)
    return ev.eval(f, dict(assignment or {}))


def grid_evaluator(box: int, box_sufficient: bool = False) -> "_DivEvaluator":
    return _DivEvaluator(box, box_sufficient)


def sigma_oracle(bound: int = 20, box: int = 50) -> tuple[int, int]:
    """Agreements between sigma and direct squaring on the grid."""
    sig = sigma_formula()
    ev = grid_evaluator(box)
    agree = total = 0
    for x in range(-bound, bound + 1):
        for y in range(-bound, bound + 1):
            total += 1
            got = eval_div_Z(sig, {"x": x, "y": y}, box, evaluator=ev)
            if got.resolved and got.is_true == (y == x * x):
                agree += 1
    return agree, total


def mu_oracle(bound: int = 10, box: int = 500) -> tuple[int, int]:
    """Agreements between mu and direct multiplication on the grid."""
    mu = mu_formula()
    ev = grid_evaluator(box)
    agree = total = 0
    for x in range(-bound, bound + 1):
        for y in range(-bound, bound + 1):
            for z in range(-bound, bound + 1):
                total += 1
                got = eval_div_Z(mu, {"x": x, "y": y, "z": z}, box, evaluator=ev)
                if got.resolved and got.is_true == (z == x * y):
                    agree += 1
    return agree, total


# ---------------------------------------------------------------------------
# Round trip: dagger output read back over the integers


class BackTranslationError(ValueError):
    pass


def back_to_div(f: GF.Formula, param: str) -> AFormula:
    """Read the guarded fragment back over the integers: the parameter is
    the unit, group product is addition, the boxed commutation shape is
    divisibility."""
    from .evaluate import _match_commutation

    def term(t: GF.Term) -> ATerm:
        if isinstance(t, GF.Ident):
            return ZERO
        if isinstance(t, GF.Var):
            return ONE if t.name == param else AVar(t.name)
        if isinstance(t, GF.Mul):
            return Add(term(t.left), term(t.right))
        raise BackTranslationError(f"unexpected term {t!r}")

    def walk(g: GF.Formula) -> AFormula:
        pattern = _match_commutation(g)
        if pattern is not None:
            xs, y = pattern
            if len(xs) != 1:
                raise BackTranslationError("unexpected tuple membership shape")
            return Divides(term(xs[0]), term(y))
        if isinstance(g, GF.Eq):
            return AEq(term(g.lhs), term(g.rhs))
        if isinstance(g, GF.Not):
            return ANot(walk(g.body))
        if isinstance(g, GF.And):
            return AAnd(walk(g.left), walk(g.right))
        if isinstance(g, GF.Or):
            return AOr(walk(g.left), walk(g.right))
        if isinstance(g, GF.Implies):
            return AImplies(walk(g.left), walk(g.right))
        if isinstance(g, GF.ForAll):
            return AForAll(g.var, walk(g.body))
        if isinstance(g, GF.Exists):
            return AExists(g.var, walk(g.body))
        raise BackTranslationError(f"unexpected node {g!r} in guarded fragment")

    return walk(f)


@dataclass(frozen=True)
class RoundtripResult:
    status: str  # agree | disagree | skip
    direct: Verdict
    via_translation: Verdict


def roundtrip_check(f: AFormula, box: int = 50) -> RoundtripResult:
    """Compare direct integer truth of a ring sentence against the value of
    its full translation read back over the integers.

    This checks the translation pipeline, not the modal semantics: the
    possibility operator and the infinite-order guard are discharged by
    interpreting the parameter as the unit."""
    ensure_dialect(f, "ring")
    direct = eval_div_Z(eliminate_times(f), {}, box, box_sufficient=True)
    dagger = translate_dagger(f)
    if not isinstance(dagger, GF.Dia) or not isinstance(dagger.body, GF.Exists):
        raise BackTranslationError("translation lost its outer shape")
    inner = dagger.body
    param = inner.var
    if not isinstance(inner.body, GF.And) or inner.body.left != GF.Not(
        GF.ord_finite(param)
    ):
        raise BackTranslationError("translation lost its infinite-order guard")
    matrix = inner.body.right
    via = eval_div_Z(back_to_div(matrix, param), {}, box, box_sufficient=True)
    if direct.is_unknown or via.is_unknown:
        return RoundtripResult("skip", direct, via)
    status = "agree" if direct.status == via.status else "disagree"
    return RoundtripResult(status, direct, via)


# ---------------------------------------------------------------------------
# Concrete syntax

import re as _re

_ARITH_KEYWORDS = frozenset({"not", "and", "or", "forall", "exists"})

_ATOKEN_RE = _re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<int>[0-9]+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<iff><->)"
    r"|(?P<arrow>->)"
    r"|(?P<sym>[()=+*|,])"
)


def _atokenize(text: str):
    tokens = []
    pos = 0
    line, col = 1, 1
    while pos < len(text):
        m = _ATOKEN_RE.match(text, pos)
        if m is None:
            raise ArithSyntaxError(f"unexpected character {text[pos]!r} at line {line}, column {col}")
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), line, col))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(("eof", "", line, col))
    return tokens


class _AParser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        tok = self.peek()
        if tok[1] != text:
            raise ArithSyntaxError(f"expected {text!r}, found {tok[1]!r} at line {tok[2]}, column {tok[3]}")
        return self.advance()

    def error(self, message):
        tok = self.peek()
        raise ArithSyntaxError(f"{message} at line {tok[2]}, column {tok[3]}")

    def parse_scope(self) -> AFormula:
        tok = self.peek()
        if tok[1] in ("forall", "exists"):
            self.advance()
            name = self.peek()
            if name[0] != "ident" or name[1] in _ARITH_KEYWORDS:
                self.error("expected a variable name after quantifier")
            self.advance()
            body = self.parse_scope()
            return (AForAll if tok[1] == "forall" else AExists)(name[1], body)
        return self.parse_iff()

    def parse_iff(self) -> AFormula:
        left = self.parse_implies()
        if self.peek()[1] == "<->":
            self.advance()
            return AIff(left, self.parse_scope())
        return left

    def parse_implies(self) -> AFormula:
        left = self.parse_or()
        if self.peek()[1] == "->":
            self.advance()
            right = self.parse_scope()
            if isinstance(right, AIff):
                # -> binds tighter than <->: reassociate
                return AIff(AImplies(left, right.left), right.right)
            return AImplies(left, right)
        return left

    def parse_or(self) -> AFormula:
        out = self.parse_and()
        while self.peek()[1] == "or":
            self.advance()
            out = AOr(out, self.parse_and())
        return out

    def parse_and(self) -> AFormula:
        out = self.parse_not()
        while self.peek()[1] == "and":
            self.advance()
            out = AAnd(out, self.parse_not())
        return out

    def parse_not(self) -> AFormula:
        tok = self.peek()
        if tok[1] == "not":
            self.advance()
            return ANot(self.parse_not())
        if tok[1] in ("forall", "exists"):
            return self.parse_scope()
        return self.parse_atom()

    def parse_atom(self) -> AFormula:
        if self.peek()[1] == "(":
            saved = self.pos
            try:
                return self.parse_relation()
            except ArithSyntaxError:
                self.pos = saved
            self.expect("(")
            body = self.parse_scope()
            self.expect(")")
            return body
        return self.parse_relation()

    def parse_relation(self) -> AFormula:
        lhs = self.parse_term()
        tok = self.peek()
        if tok[1] == "=":
            self.advance()
            return AEq(lhs, self.parse_term())
        if tok[1] == "|":
            self.advance()
            return Divides(lhs, self.parse_term())
        if isinstance(lhs, Fn):
            return Pred(lhs.name, lhs.args)
        self.error("expected '=' or '|'")

    def parse_term(self) -> ATerm:
        out = self.parse_mul()
        while self.peek()[1] == "+":
            self.advance()
            out = Add(out, self.parse_mul())
        return out

    def parse_mul(self) -> ATerm:
        out = self.parse_factor()
        while self.peek()[1] == "*":
            self.advance()
            out = Times(out, self.parse_factor())
        return out

    def parse_factor(self) -> ATerm:
        tok = self.peek()
        if tok[0] == "int":
            self.advance()
            return numeral(int(tok[1]))
        if tok[0] == "ident":
            if tok[1] in _ARITH_KEYWORDS:
                self.error(f"keyword {tok[1]!r} cannot start a term")
            self.advance()
            if self.peek()[1] == "(":
                self.advance()
                args = []
                if self.peek()[1] != ")":
                    args.append(self.parse_term())
                    while self.peek()[1] == ",":
                        self.advance()
                        args.append(self.parse_term())
                self.expect(")")
                return Fn(tok[1], tuple(args))
            return AVar(tok[1])
        if tok[1] == "(":
            self.advance()
            inner = self.parse_term()
            self.expect(")")
            return inner
        self.error("expected a term")


def parse_arith(text: str) -> AFormula:
    parser = _AParser(_atokenize(text))
    out = parser.parse_scope()
    tok = parser.peek()
    if tok[0] != "eof":
        raise ArithSyntaxError(f"trailing input starting at {tok[1]!r} (line {tok[2]}, column {tok[3]})")
    return out


_LVL_IFF, _LVL_IMP, _LVL_OR, _LVL_AND, _LVL_NOT = 1, 2, 3, 4, 5


def render_aterm(t: ATerm, min_level: int = 0) -> str:
    # levels: Add = 1, Times = 2, atoms = 3
    if isinstance(t, Zero):
        return "0"
    if isinstance(t, One):
        return "1"
    if isinstance(t, AVar):
        return t.name
    if isinstance(t, Fn):
        return f"{t.name}({', '.join(render_aterm(a) for a in t.args)})"
    if isinstance(t, Add):
        text = f"{render_aterm(t.left, 1)} + {render_aterm(t.right, 2)}"
        return f"({text})" if min_level > 1 else text
    if isinstance(t, Times):
        text = f"{render_aterm(t.left, 2)}*{render_aterm(t.right, 3)}"
        return f"({text})" if min_level > 2 else text
    raise TypeError(f"not an arithmetic term: {t!r}")


def render_arith(f: AFormula, min_level: int = 0, tail: bool = True) -> str:
    if isinstance(f, (AForAll, AExists)):
        kw = "forall" if isinstance(f, AForAll) else "exists"
        text = f"{kw} {f.var} {render_arith(f.body, 0, True)}"
        return text if tail else f"({text})"
    if isinstance(f, AEq):
        return f"{render_aterm(f.lhs)} = {render_aterm(f.rhs)}"
    if isinstance(f, Divides):
        return f"{render_aterm(f.lhs)} | {render_aterm(f.rhs)}"
    if isinstance(f, Pred):
        return f"{f.name}({', '.join(render_aterm(a) for a in f.args)})"
    if isinstance(f, ANot):
        return f"not {render_arith(f.body, _LVL_NOT, tail)}"
    pairs = {AIff: ("<->", _LVL_IFF), AImplies: ("->", _LVL_IMP), AOr: ("or", _LVL_OR), AAnd: ("and", _LVL_AND)}
    for cls, (op, lvl) in pairs.items():
        if isinstance(f, cls):
            if cls in (AIff, AImplies):
                left = render_arith(f.left, lvl + 1, False)
                right = render_arith(f.right, lvl, tail)
            else:
                left = render_arith(f.left, lvl, False)
                right = render_arith(f.right, lvl + 1, tail)
            text = f"{left} {op} {right}"
            return f"({text})" if lvl < min_level else text
    raise TypeError(f"not an arithmetic formula: {f!r}")
