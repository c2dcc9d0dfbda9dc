"""Numeric codes for sentences, presentations, words, homomorphism codes,
and tuples; the totalization and padding conventions; the back-and-forth
construction for computable isomorphisms; and the compiler from modal
group formulas to arithmetic truth predicates.

A code is pair(kind_tag, payload).  The payload is the little-endian
base-256 value of the object's token stream (prefix serialization), so
code size grows linearly with object size and every number decodes or is
rejected, never crashes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

from . import arith as A
from . import formulas as F
from . import groups as G
from . import presentations as P
from . import verdict as V
from .verdict import Verdict


class CodingError(ValueError):
    pass


class TotalizationError(ValueError):
    def __init__(self, message: str, collision: tuple[int, int] | None = None):
        super().__init__(message)
        self.collision = collision


class InjectivityAbort(RuntimeError):
    def __init__(self, message: str, witness: tuple[int, int]):
        super().__init__(message)
        self.witness = witness


# ---------------------------------------------------------------------------
# Pairing (the classical diagonal pairing)


def pair(x: int, y: int) -> int:
    if x < 0 or y < 0:
        raise CodingError("pairing is defined on naturals")
    s = x + y
    return s * (s + 1) // 2 + y


def unpair(n: int) -> tuple[int, int]:
    if n < 0:
        raise CodingError("codes are naturals")
    s = (math.isqrt(8 * n + 1) - 1) // 2
    y = n - s * (s + 1) // 2
    return s - y, y


KIND_GROUP_SENTENCE = "group-sentence"
KIND_ARITH_SENTENCE = "arith-sentence"
KIND_WORD = "word"
KIND_PRESENTATION = "presentation"
KIND_HOMCODE = "homcode"
KIND_TUPLE = "tuple"

_KIND_TAGS = {
    KIND_GROUP_SENTENCE: 0,
    KIND_ARITH_SENTENCE: 1,
    KIND_WORD: 2,
    KIND_PRESENTATION: 3,
    KIND_HOMCODE: 4,
    KIND_TUPLE: 5,
}


@dataclass(frozen=True)
class GodelCode:
    value: int
    kind: str

    def __post_init__(self):
        if self.kind not in _KIND_TAGS:
            raise CodingError(f"unknown code kind {self.kind!r}")
        if self.value < 0:
            raise CodingError("codes are naturals")


# ---------------------------------------------------------------------------
# Token alphabet

_D = {str(d): d + 1 for d in range(10)}  # digits 1..10
INT_END = 11
SIGN_POS = 12
SIGN_NEG = 13
WORD_END = 14
NAME_END = 15

_CHARS = "abcdefghijklmnopqrstuvwxyz0123456789_ABCDEFGHIJKLMNOPQRSTUVWXYZ"
_CHAR_TOK = {c: 16 + i for i, c in enumerate(_CHARS)}
_TOK_CHAR = {v: k for k, v in _CHAR_TOK.items()}

T_E, T_VAR, T_PARAM, T_MUL, T_INV = 90, 91, 92, 93, 94
F_EQ, F_NOT, F_AND, F_OR, F_IMP, F_ALL, F_EX, F_BOX, F_DIA = (
    95, 96, 97, 98, 99, 100, 101, 102, 103,
)
A_ZERO, A_ONE, A_VAR, A_ADD, A_TIMES, A_FN = 110, 111, 112, 113, 114, 115
A_EQ, A_DIV, A_PRED, A_NOT, A_AND, A_OR, A_IMP, A_IFF, A_ALL, A_EX = (
    116, 117, 118, 119, 120, 121, 122, 123, 124, 125,
)
ARGS_END = 126


def _tokens_to_payload(tokens: list[int]) -> int:
    if any(not 1 <= t <= 255 for t in tokens):
        raise CodingError("token id out of byte range")
    return int.from_bytes(bytes(tokens), "little")


def _payload_to_tokens(payload: int) -> list[int] | None:
    if payload < 0:
        return None
    if payload == 0:
        return []
    raw = payload.to_bytes((payload.bit_length() + 7) // 8, "little")
    if 0 in raw:
        return None
    return list(raw)


def _emit_int(out: list[int], n: int) -> None:
    if n < 0:
        raise CodingError("expected a natural number")
    for ch in str(n):
        out.append(_D[ch])
    out.append(INT_END)


def _emit_name(out: list[int], name: str) -> None:
    for ch in name:
        tok = _CHAR_TOK.get(ch)
        if tok is None:
            raise CodingError(f"name character {ch!r} is outside the alphabet")
        out.append(tok)
    out.append(NAME_END)


class _TokenReader:
    def __init__(self, tokens: list[int]):
        self.tokens = tokens
        self.pos = 0

    def done(self) -> bool:
        return self.pos >= len(self.tokens)

    def next(self) -> int:
        if self.done():
            raise CodingError("truncated token stream")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def read_int(self) -> int:
        digits = []
        while True:
            tok = self.next()
            if tok == INT_END:
                break
            for ch, tid in _D.items():
                if tid == tok:
                    digits.append(ch)
                    break
            else:
                raise CodingError("bad digit token")
        if not digits or (len(digits) > 1 and digits[0] == "0"):
            raise CodingError("bad integer encoding")
        return int("".join(digits))

    def read_name(self) -> str:
        chars = []
        while True:
            tok = self.next()
            if tok == NAME_END:
                break
            ch = _TOK_CHAR.get(tok)
            if ch is None:
                raise CodingError("bad name token")
            chars.append(ch)
        name = "".join(chars)
        if not name.isidentifier():
            raise CodingError(f"bad name {name!r}")
        return name


# ---------------------------------------------------------------------------
# Object serializers (iterative, so deep paddings do not overflow the stack)


def _word_tokens(out: list[int], word: P.GroupWord) -> None:
    for letter in word:
        if letter == 0:
            raise CodingError("word letters are nonzero")
        out.append(SIGN_POS if letter > 0 else SIGN_NEG)
        _emit_int(out, abs(letter))
    out.append(WORD_END)


def _read_word(r: _TokenReader) -> P.GroupWord:
    letters = []
    while True:
        tok = r.next()
        if tok == WORD_END:
            return tuple(letters)
        if tok == SIGN_POS:
            letters.append(r.read_int())
        elif tok == SIGN_NEG:
            letters.append(-r.read_int())
        else:
            raise CodingError("bad word token")


def _presentation_tokens(out: list[int], p: P.FinitePresentation) -> None:
    _emit_int(out, p.n_generators)
    for name in p.gen_names:
        _emit_name(out, name)
    _emit_int(out, len(p.relators))
    for rel in p.relators:
        _word_tokens(out, rel)


def _read_presentation(r: _TokenReader) -> P.FinitePresentation:
    n = r.read_int()
    names = tuple(r.read_name() for _ in range(n))
    m = r.read_int()
    relators = tuple(_read_word(r) for _ in range(m))
    return P.FinitePresentation(names, relators)


_GRP_FORMULA_TAGS = {
    F.Eq: F_EQ, F.Not: F_NOT, F.And: F_AND, F.Or: F_OR, F.Implies: F_IMP,
    F.ForAll: F_ALL, F.Exists: F_EX, F.Box: F_BOX, F.Dia: F_DIA,
}


def _group_formula_tokens(out: list[int], f: F.Formula) -> None:
    stack: list = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, str):
            _emit_name(out, node)
        elif isinstance(node, int):
            _emit_int(out, node)
        elif isinstance(node, F.Ident):
            out.append(T_E)
        elif isinstance(node, F.Var):
            out.append(T_VAR)
            _emit_name(out, node.name)
        elif isinstance(node, F.Param):
            out.append(T_PARAM)
            _emit_int(out, node.index)
        elif isinstance(node, F.Mul):
            out.append(T_MUL)
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, F.Inv):
            out.append(T_INV)
            stack.append(node.inner)
        elif isinstance(node, F.Eq):
            out.append(F_EQ)
            stack.append(node.rhs)
            stack.append(node.lhs)
        elif isinstance(node, (F.Not, F.Box, F.Dia)):
            out.append(_GRP_FORMULA_TAGS[type(node)])
            stack.append(node.body)
        elif isinstance(node, (F.And, F.Or, F.Implies)):
            out.append(_GRP_FORMULA_TAGS[type(node)])
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, (F.ForAll, F.Exists)):
            out.append(_GRP_FORMULA_TAGS[type(node)])
            _emit_name(out, node.var)
            stack.append(node.body)
        else:
            raise CodingError(f"cannot serialize {node!r}")


def _read_group_term(r: _TokenReader):
    tok = r.next()
    if tok == T_E:
        return F.E
    if tok == T_VAR:
        return F.Var(r.read_name())
    if tok == T_PARAM:
        return F.Param(r.read_int())
    if tok == T_MUL:
        return F.Mul(_read_group_term(r), _read_group_term(r))
    if tok == T_INV:
        return F.Inv(_read_group_term(r))
    raise CodingError("bad group term token")


def _read_group_formula(r: _TokenReader) -> F.Formula:
    # iterative prefix parse: frames of (constructor, needed, children)
    def start(tok):
        if tok == F_EQ:
            return ("eq", 0, [])
        if tok == F_NOT:
            return (lambda b: F.Not(b), 1, [])
        if tok == F_AND:
            return (lambda l, r2: F.And(l, r2), 2, [])
        if tok == F_OR:
            return (lambda l, r2: F.Or(l, r2), 2, [])
        if tok == F_IMP:
            return (lambda l, r2: F.Implies(l, r2), 2, [])
        if tok == F_BOX:
            return (lambda b: F.Box(b), 1, [])
        if tok == F_DIA:
            return (lambda b: F.Dia(b), 1, [])
        if tok in (F_ALL, F_EX):
            name = r.read_name()
            cls = F.ForAll if tok == F_ALL else F.Exists
            return (lambda b, _n=name, _c=cls: _c(_n, b), 1, [])
        raise CodingError("bad group formula token")

    frames = [start(r.next())]
    while True:
        ctor, needed, children = frames[-1]
        if ctor == "eq":
            value = F.Eq(_read_group_term(r), _read_group_term(r))
            frames.pop()
        elif len(children) < needed:
            frames.append(start(r.next()))
            continue
        else:
            value = ctor(*children)
            frames.pop()
        if not frames:
            return value
        frames[-1][2].append(value)


_ARITH_BIN = {A.Add: A_ADD, A.Times: A_TIMES}
_ARITH_FORM = {
    A.AEq: A_EQ, A.Divides: A_DIV, A.ANot: A_NOT, A.AAnd: A_AND, A.AOr: A_OR,
    A.AImplies: A_IMP, A.AIff: A_IFF, A.AForAll: A_ALL, A.AExists: A_EX,
}


def _arith_tokens(out: list[int], f) -> None:
    stack: list = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, A.Zero):
            out.append(A_ZERO)
        elif isinstance(node, A.One):
            out.append(A_ONE)
        elif isinstance(node, A.AVar):
            out.append(A_VAR)
            _emit_name(out, node.name)
        elif isinstance(node, (A.Add, A.Times)):
            out.append(_ARITH_BIN[type(node)])
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, A.Fn):
            out.append(A_FN)
            _emit_name(out, node.name)
            stack.append(ARGS_END)
            for arg in reversed(node.args):
                stack.append(arg)
        elif node == ARGS_END:
            out.append(ARGS_END)
        elif isinstance(node, (A.AEq, A.Divides)):
            out.append(_ARITH_FORM[type(node)])
            stack.append(node.rhs)
            stack.append(node.lhs)
        elif isinstance(node, A.Pred):
            out.append(A_PRED)
            _emit_name(out, node.name)
            stack.append(ARGS_END)
            for arg in reversed(node.args):
                stack.append(arg)
        elif isinstance(node, A.ANot):
            out.append(A_NOT)
            stack.append(node.body)
        elif isinstance(node, (A.AAnd, A.AOr, A.AImplies, A.AIff)):
            out.append(_ARITH_FORM[type(node)])
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, (A.AForAll, A.AExists)):
            out.append(_ARITH_FORM[type(node)])
            _emit_name(out, node.var)
            stack.append(node.body)
        else:
            raise CodingError(f"cannot serialize {node!r}")


def _read_arith_term(r: _TokenReader):
    tok = r.next()
    if tok == A_ZERO:
        return A.ZERO
    if tok == A_ONE:
        return A.ONE
    if tok == A_VAR:
        return A.AVar(r.read_name())
    if tok == A_ADD:
        return A.Add(_read_arith_term(r), _read_arith_term(r))
    if tok == A_TIMES:
        return A.Times(_read_arith_term(r), _read_arith_term(r))
    if tok == A_FN:
        name = r.read_name()
        args = []
        while r.tokens[r.pos] != ARGS_END:
            args.append(_read_arith_term(r))
        r.next()
        return A.Fn(name, tuple(args))
    raise CodingError("bad arithmetic term token")


def _read_arith_formula(r: _TokenReader):
    def start(tok):
        if tok in (A_EQ, A_DIV):
            cls = A.AEq if tok == A_EQ else A.Divides
            return (("atom", cls), 0, [])
        if tok == A_PRED:
            name = r.read_name()
            args = []
            while r.tokens[r.pos] != ARGS_END:
                args.append(_read_arith_term(r))
            r.next()
            return (("pred", name, tuple(args)), 0, [])
        if tok == A_NOT:
            return (lambda b: A.ANot(b), 1, [])
        mapping = {A_AND: A.AAnd, A_OR: A.AOr, A_IMP: A.AImplies, A_IFF: A.AIff}
        if tok in mapping:
            cls = mapping[tok]
            return (lambda l, r2, _c=cls: _c(l, r2), 2, [])
        if tok in (A_ALL, A_EX):
            name = r.read_name()
            cls = A.AForAll if tok == A_ALL else A.AExists
            return (lambda b, _n=name, _c=cls: _c(_n, b), 1, [])
        raise CodingError("bad arithmetic formula token")

    frames = [start(r.next())]
    while True:
        ctor, needed, children = frames[-1]
        if isinstance(ctor, tuple) and ctor[0] == "atom":
            value = ctor[1](_read_arith_term(r), _read_arith_term(r))
            frames.pop()
        elif isinstance(ctor, tuple) and ctor[0] == "pred":
            value = A.Pred(ctor[1], ctor[2])
            frames.pop()
        elif len(children) < needed:
            frames.append(start(r.next()))
            continue
        else:
            value = ctor(*children)
            frames.pop()
        if not frames:
            return value
        frames[-1][2].append(value)


# ---------------------------------------------------------------------------
# Public encode / decode


def _encode(kind: str, tokens: list[int]) -> GodelCode:
    return GodelCode(pair(_KIND_TAGS[kind], _tokens_to_payload(tokens)), kind)


def _decode_tokens(n: int, kind: str) -> list[int] | None:
    if n < 0:
        return None
    tag, payload = unpair(n)
    if tag != _KIND_TAGS[kind]:
        return None
    return _payload_to_tokens(payload)


def encode_word(w: P.GroupWord) -> GodelCode:
    out: list[int] = []
    _word_tokens(out, tuple(w))
    return _encode(KIND_WORD, out)


def decode_word(n: int) -> P.GroupWord | None:
    tokens = _decode_tokens(n, KIND_WORD)
    if tokens is None:
        return None
    try:
        r = _TokenReader(tokens)
        word = _read_word(r)
        if not r.done():
            return None
        return word
    except CodingError:
        return None


def encode_presentation(p: P.FinitePresentation) -> GodelCode:
    out: list[int] = []
    _presentation_tokens(out, p)
    return _encode(KIND_PRESENTATION, out)


def decode_presentation(n: int) -> P.FinitePresentation | None:
    tokens = _decode_tokens(n, KIND_PRESENTATION)
    if tokens is None:
        return None
    try:
        r = _TokenReader(tokens)
        p = _read_presentation(r)
        if not r.done():
            return None
        return p
    except (CodingError, P.PresentationFormatError):
        return None


def encode_hom_code(hc: P.HomCode) -> GodelCode:
    out: list[int] = []
    _presentation_tokens(out, hc.source)
    _presentation_tokens(out, hc.target)
    for image in hc.images:
        _word_tokens(out, image)
    return _encode(KIND_HOMCODE, out)


def decode_hom_code(n: int) -> P.HomCode | None:
    tokens = _decode_tokens(n, KIND_HOMCODE)
    if tokens is None:
        return None
    try:
        r = _TokenReader(tokens)
        source = _read_presentation(r)
        target = _read_presentation(r)
        images = tuple(_read_word(r) for _ in range(source.n_generators))
        if not r.done():
            return None
        return P.HomCode(source, target, images)
    except (CodingError, P.PresentationFormatError):
        return None


def encode_tuple(values: tuple[int, ...]) -> GodelCode:
    out: list[int] = []
    _emit_int(out, len(values))
    for v in values:
        _emit_int(out, v)
    return _encode(KIND_TUPLE, out)


def decode_tuple(n: int) -> tuple[int, ...] | None:
    tokens = _decode_tokens(n, KIND_TUPLE)
    if tokens is None:
        return None
    try:
        r = _TokenReader(tokens)
        k = r.read_int()
        values = tuple(r.read_int() for _ in range(k))
        if not r.done():
            return None
        return values
    except CodingError:
        return None


def encode_group_formula(f: F.Formula) -> GodelCode:
    out: list[int] = []
    _group_formula_tokens(out, f)
    return _encode(KIND_GROUP_SENTENCE, out)


def decode_group_formula(n: int) -> F.Formula | None:
    tokens = _decode_tokens(n, KIND_GROUP_SENTENCE)
    if tokens is None:
        return None
    try:
        r = _TokenReader(tokens)
        f = _read_group_formula(r)
        if not r.done():
            return None
        return f
    except (CodingError, F.BuilderError):
        return None


def encode_arith_sentence(f) -> GodelCode:
    out: list[int] = []
    _arith_tokens(out, f)
    return _encode(KIND_ARITH_SENTENCE, out)


def decode_arith_formula(n: int):
    tokens = _decode_tokens(n, KIND_ARITH_SENTENCE)
    if tokens is None:
        return None
    try:
        r = _TokenReader(tokens)
        f = _read_arith_formula(r)
        if not r.done():
            return None
        return f
    except CodingError:
        return None


def is_group_sentence_code(n: int) -> bool:
    f = decode_group_formula(n)
    return f is not None and not F.free_vars(f)


def is_arith_sentence_code(n: int) -> bool:
    f = decode_arith_formula(n)
    return f is not None and not A.afree_vars(f)


def fp_group_pred(n: int) -> bool:
    """Decidable: n codes a finite presentation."""
    return decode_presentation(n) is not None


def elt_pred(e: int, w: int) -> bool:
    """Decidable: w codes a word over the generators of the presentation
    coded by e."""
    p = decode_presentation(e)
    word = decode_word(w)
    if p is None or word is None:
        return False
    return all(1 <= abs(letter) <= p.n_generators for letter in word)


# ---------------------------------------------------------------------------
# Padding and the totalization convention


def pad_grp(n: int) -> F.Formula:
    """(n+1)-fold right-associated conjunction of e = e."""
    if n < 0:
        raise CodingError("padding index is a natural number")
    out: F.Formula = F.Eq(F.E, F.E)
    for _ in range(n):
        out = F.And(F.Eq(F.E, F.E), out)
    return out


def pad_arith(n: int):
    if n < 0:
        raise CodingError("padding index is a natural number")
    zero = A.AEq(A.ZERO, A.ZERO)
    out = zero
    for _ in range(n):
        out = A.AAnd(A.AEq(A.ZERO, A.ZERO), out)
    return out


@dataclass(frozen=True)
class LanguageSpec:
    name: str
    kind: str
    and_tag: int
    is_sentence_code: Callable[[int], bool]
    decode: Callable[[int], object]
    encode: Callable[[object], GodelCode]
    tag_true: Callable[[], object]
    contradiction: Callable[[], object]
    conj: Callable[[object, object], object]


def group_language() -> LanguageSpec:
    return LanguageSpec(
        name="group",
        kind=KIND_GROUP_SENTENCE,
        and_tag=F_AND,
        is_sentence_code=is_group_sentence_code,
        decode=decode_group_formula,
        encode=encode_group_formula,
        tag_true=lambda: F.Exists("z", F.Eq(F.Var("z"), F.Var("z"))),
        contradiction=lambda: F.ForAll("z", F.Not(F.Eq(F.Var("z"), F.Var("z")))),
        conj=F.And,
    )


def arith_language() -> LanguageSpec:
    return LanguageSpec(
        name="arith",
        kind=KIND_ARITH_SENTENCE,
        and_tag=A_AND,
        is_sentence_code=is_arith_sentence_code,
        decode=decode_arith_formula,
        encode=encode_arith_sentence,
        tag_true=lambda: A.AExists("z", A.AEq(A.AVar("z"), A.AVar("z"))),
        contradiction=lambda: A.AForAll("z", A.ANot(A.AEq(A.AVar("z"), A.AVar("z")))),
        conj=A.AAnd,
    )


def chi(lang: LanguageSpec, n: int):
    """Right-associated conjunction of n+1 copies of the tagged truth."""
    out = lang.tag_true()
    for _ in range(n):
        out = lang.conj(lang.tag_true(), out)
    return out


def delta(lang: LanguageSpec, n: int):
    """The n-th designated contradiction: (forall z, z differs from itself)
    conjoined with chi_n."""
    return lang.conj(lang.contradiction(), chi(lang, n))


def _serialize(lang: LanguageSpec, ast) -> list[int]:
    out: list[int] = []
    if lang.name == "group":
        _group_formula_tokens(out, ast)
    else:
        _arith_tokens(out, ast)
    return out


def delta_code(lang: LanguageSpec, n: int) -> int:
    """The code of delta_n, assembled from its periodic token stream so
    large paddings stay linear-time (delta_n is a fixed prefix, n repeated
    conjunct blocks, and a tail)."""
    and_b = bytes([lang.and_tag])
    contradiction_b = bytes(_serialize(lang, lang.contradiction()))
    tag_b = bytes(_serialize(lang, lang.tag_true()))
    stream = and_b + contradiction_b + (and_b + tag_b) * n + tag_b
    return pair(_KIND_TAGS[lang.kind], int.from_bytes(stream, "little"))


@dataclass
class ReductionMap:
    """Total computable translation on codes with a tested injectivity
    certificate."""

    fn: Callable[[int], int]
    source: str
    target: str
    tested_range: int

    def __call__(self, n: int) -> int:
        return self.fn(n)


def totalize(
    tau: Callable[[object], object],
    source: LanguageSpec,
    target: LanguageSpec,
    test_range: int = 10**4,
) -> ReductionMap:
    """Extend a sentence translation to a total injective map on all
    naturals: sentences are tagged with a truth conjunct, and every
    non-sentence number goes to its own designated contradiction."""

    def run(n: int) -> int:
        if source.is_sentence_code(n):
            sentence = source.decode(n)
            return target.encode(target.conj(target.tag_true(), tau(sentence))).value
        return delta_code(target, n)

    seen: dict[int, int] = {}
    for n in range(test_range + 1):
        value = run(n)
        h = hash(value)
        if h in seen:
            other = seen[h]
            if run(other) == value:
                raise TotalizationError(
                    f"translation collides at {other} and {n}", (other, n)
                )
        seen[h] = n
    return ReductionMap(run, source.name, target.name, test_range)


# ---------------------------------------------------------------------------
# Back-and-forth combination of two one-one reductions


def myhill_combine(
    f: Callable[[int], int],
    g: Callable[[int], int],
    steps: int,
) -> dict[int, int]:
    """Interleave two total injective reductions into a finite partial
    bijection that preserves membership on its domain; more steps extend
    the result monotonically."""
    forward: dict[int, int] = {}
    backward: dict[int, int] = {}
    f_seen: dict[int, int] = {}
    g_seen: dict[int, int] = {}

    def checked(fn, seen, x):
        y = fn(x)
        if y in seen and seen[y] != x:
            raise InjectivityAbort(
                f"reduction maps {seen[y]} and {x} to the same value", (seen[y], x)
            )
        seen[y] = x
        return y

    for round_no in range(steps):
        if round_no % 2 == 0:
            x = 0
            while x in forward:
                x += 1
            y = checked(f, f_seen, x)
            while y in backward:
                y = checked(f, f_seen, backward[y])
            forward[x] = y
            backward[y] = x
        else:
            y = 0
            while y in backward:
                y += 1
            x = checked(g, g_seen, y)
            while x in forward:
                x = checked(g, g_seen, forward[x])
            backward[y] = x
            forward[x] = y
    return dict(forward)


# ---------------------------------------------------------------------------
# The compiler from modal group formulas to arithmetic predicates


def emit_valpred(phi: F.Formula, params: tuple[str, ...] = ()) -> A.AFormula:
    """Compile a modal group formula to an arithmetic formula over a
    presentation code e and word codes w1..wk.

    Atomic equations become derivation-existence claims about words built
    by concatenation and inversion; first-order quantifiers relativize to
    the words of the current presentation; the modal operators quantify
    over presentation and homomorphism codes, transporting the free
    variables through the coded homomorphism."""
    if F.has_inverses(phi):
        raise CodingError("expand formal inverses before compiling")
    if not F.free_vars(phi) <= set(params):
        missing = sorted(F.free_vars(phi) - set(params))
        raise CodingError(f"unlisted parameters: {missing}")
    counter = [0]

    def fresh(prefix: str) -> str:
        counter[0] += 1
        return f"{prefix}{counter[0]}"

    def term_to_word(t: F.Term, env: dict[str, str]) -> A.ATerm:
        if isinstance(t, F.Ident):
            return A.Fn("empty_word", ())
        if isinstance(t, F.Var):
            try:
                return A.AVar(env[t.name])
            except KeyError:
                raise CodingError(f"unbound variable {t.name!r}") from None
        if isinstance(t, F.Param):
            if t.index >= len(params):
                raise CodingError(f"parameter ${t.index} out of range")
            return A.AVar(env[params[t.index]])
        if isinstance(t, F.Mul):
            return A.Fn("concat", (term_to_word(t.left, env), term_to_word(t.right, env)))
        raise CodingError(f"cannot compile term {t!r}")

    def walk(f: F.Formula, env: dict[str, str], e_var: str) -> A.AFormula:
        if isinstance(f, F.Eq):
            word = A.Fn(
                "concat",
                (term_to_word(f.lhs, env), A.Fn("invert", (term_to_word(f.rhs, env),))),
            )
            return A.Pred("DerivesTrivial", (A.AVar(e_var), word))
        if isinstance(f, F.Not):
            return A.ANot(walk(f.body, env, e_var))
        if isinstance(f, F.And):
            return A.AAnd(walk(f.left, env, e_var), walk(f.right, env, e_var))
        if isinstance(f, F.Or):
            return A.AOr(walk(f.left, env, e_var), walk(f.right, env, e_var))
        if isinstance(f, F.Implies):
            return A.AImplies(walk(f.left, env, e_var), walk(f.right, env, e_var))
        if isinstance(f, (F.ForAll, F.Exists)):
            u = fresh("v")
            child = dict(env)
            child[f.var] = u
            guard = A.Pred("EltPred", (A.AVar(e_var), A.AVar(u)))
            body = walk(f.body, child, e_var)
            if isinstance(f, F.ForAll):
                return A.AForAll(u, A.AImplies(guard, body))
            return A.AExists(u, A.AAnd(guard, body))
        if isinstance(f, (F.Box, F.Dia)):
            counter[0] += 1
            k = counter[0]
            e_next = f"e{k}"
            h_var = f"h{k}"
            carried = [v for v in env if v in F.free_vars(f.body)]
            child = dict(env)
            images = []
            for i, v in enumerate(carried):
                img = f"u{k}x{i + 1}"
                child[v] = img
                images.append((env[v], img))
            guards: list[A.AFormula] = [
                A.Pred("FPGroupPred", (A.AVar(e_next),)),
                A.Pred("HomPred", (A.AVar(e_var), A.AVar(h_var), A.AVar(e_next))),
            ]
            for src, img in images:
                guards.append(A.Pred("ApplyPred", (A.AVar(h_var), A.AVar(src), A.AVar(img))))
                guards.append(A.Pred("EltPred", (A.AVar(e_next), A.AVar(img))))
            val = walk(f.body, child, e_next)
            if isinstance(f, F.Dia):
                matrix = A.a_conj(guards + [val])
                out: A.AFormula = matrix
                for _, img in reversed(images):
                    out = A.AExists(img, out)
                return A.AExists(e_next, A.AExists(h_var, out))
            matrix = A.AImplies(A.a_conj(guards), val)
            out = matrix
            for _, img in reversed(images):
                out = A.AForAll(img, out)
            return A.AForAll(e_next, A.AForAll(h_var, out))
        raise TypeError(f"not a formula: {f!r}")

    env = {name: f"w{i + 1}" for i, name in enumerate(params)}
    return walk(phi, env, "e")


# ---------------------------------------------------------------------------
# Bounded interpretation of the compiled predicates


_STANDARD_PRESENTATIONS = (
    "gens: ; rels:",
    "gens: a ; rels: a",
    "gens: a ; rels: a a",
    "gens: a ; rels: a a a",
    "gens: a ; rels: a a a a",
    "gens: a b ; rels: a a , b b , a b a b",
)


@lru_cache(maxsize=None)
def standard_targets() -> tuple[P.FinitePresentation, ...]:
    return tuple(P.parse_presentation(text) for text in _STANDARD_PRESENTATIONS)


@lru_cache(maxsize=None)
def _short_words(n_gens: int, max_len: int = 2) -> tuple[P.GroupWord, ...]:
    out = [()]
    letters = [i for i in range(1, n_gens + 1)] + [-i for i in range(1, n_gens + 1)]
    frontier: list[P.GroupWord] = [()]
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            for letter in letters:
                cand = P.free_reduce(w + (letter,))
                if cand not in out:
                    out.append(cand)
                    nxt.append(cand)
        frontier = nxt
    return tuple(out)


@lru_cache(maxsize=None)
def verified_homs(
    source: P.FinitePresentation, target: P.FinitePresentation, budget: int
) -> tuple[P.HomCode, ...]:
    """Homomorphism codes whose relator checks succeeded within budget;
    unverified candidates are treated as absent."""
    out = []
    for images in _image_tuples(source.n_generators, target.n_generators):
        hc = P.HomCode(source, target, images)
        ok = True
        for rel in source.relators:
            image = P.apply_hom_code(hc, rel)
            if not P.derives_trivial(target, image, budget).is_true:
                ok = False
                break
        if ok:
            out.append(hc)
    return tuple(out)


@lru_cache(maxsize=None)
def _image_tuples(n_src: int, n_tgt: int) -> tuple[tuple[P.GroupWord, ...], ...]:
    import itertools

    words = _short_words(n_tgt)
    return tuple(itertools.product(words, repeat=n_src))


class _ValPredEvaluator:
    def __init__(self, budget: int, quotient_bound: int = 8):
        self.budget = budget
        self.quotient_bound = quotient_bound

    def _atom(self, pres: P.FinitePresentation, word: P.GroupWord) -> Verdict:
        if P.derives_trivial(pres, word, self.budget).is_true:
            return V.true()
        disproof = P.disprove_trivial(pres, word, self.quotient_bound)
        if disproof is not None:
            return V.false(evidence=disproof)
        return V.unknown(self.budget)

    def _word_term(self, t: A.ATerm, env: dict) -> P.GroupWord:
        if isinstance(t, A.Fn):
            if t.name == "empty_word":
                return ()
            if t.name == "concat":
                return P.concat_words(
                    self._word_term(t.args[0], env), self._word_term(t.args[1], env)
                )
            if t.name == "invert":
                return P.invert_word(self._word_term(t.args[0], env))
            raise CodingError(f"unknown word function {t.name!r}")
        if isinstance(t, A.AVar):
            value = env.get(t.name)
            if not isinstance(value, tuple):
                raise CodingError(f"variable {t.name!r} does not hold a word")
            return value
        raise CodingError(f"cannot interpret word term {t!r}")

    @staticmethod
    def _flatten_conj(f: A.AFormula) -> list[A.AFormula]:
        if isinstance(f, A.AAnd):
            return _ValPredEvaluator._flatten_conj(f.left) + _ValPredEvaluator._flatten_conj(
                f.right
            )
        return [f]

    def _match_first_order(self, f: A.AFormula):
        if isinstance(f, A.AExists) and isinstance(f.body, A.AAnd):
            guard = f.body.left
            if (
                isinstance(guard, A.Pred)
                and guard.name == "EltPred"
                and isinstance(guard.args[1], A.AVar)
                and guard.args[1].name == f.var
                and isinstance(guard.args[0], A.AVar)
            ):
                return "exists", f.var, guard.args[0].name, f.body.right
        if isinstance(f, A.AForAll) and isinstance(f.body, A.AImplies):
            guard = f.body.left
            if (
                isinstance(guard, A.Pred)
                and guard.name == "EltPred"
                and isinstance(guard.args[1], A.AVar)
                and guard.args[1].name == f.var
                and isinstance(guard.args[0], A.AVar)
            ):
                return "forall", f.var, guard.args[0].name, f.body.right
        return None

    def _match_modal(self, f: A.AFormula):
        kind = "dia" if isinstance(f, A.AExists) else "box"
        quant = A.AExists if kind == "dia" else A.AForAll
        if not isinstance(f, quant):
            return None
        e_next = f.var
        if not isinstance(f.body, quant):
            return None
        h_var = f.body.var
        inner = f.body.body
        image_vars = []
        while isinstance(inner, quant):
            image_vars.append(inner.var)
            inner = inner.body
        if kind == "dia":
            parts = self._flatten_conj(inner)
            guards, val_parts = [], []
            for part in parts:
                if isinstance(part, A.Pred) and part.name in (
                    "FPGroupPred", "HomPred", "ApplyPred", "EltPred"
                ):
                    guards.append(part)
                else:
                    val_parts.append(part)
            if not val_parts:
                return None
            val = val_parts[0]
            for extra in val_parts[1:]:
                val = A.AAnd(val, extra)
        else:
            if not isinstance(inner, A.AImplies):
                return None
            guards = self._flatten_conj(inner.left)
            val = inner.right
        pairs = []
        hom_ok = False
        e_src = None
        for gpart in guards:
            if not isinstance(gpart, A.Pred):
                return None
            if gpart.name == "HomPred":
                e_src = gpart.args[0].name
                hom_ok = True
            if gpart.name == "ApplyPred":
                pairs.append((gpart.args[1].name, gpart.args[2].name))
        if not hom_ok or e_src is None:
            return None
        return kind, e_next, h_var, e_src, pairs, val

    def eval(self, f: A.AFormula, env: dict) -> Verdict:
        if isinstance(f, A.Pred):
            if f.name == "DerivesTrivial":
                pres = env.get(f.args[0].name)
                if not isinstance(pres, P.FinitePresentation):
                    raise CodingError("presentation variable is unbound")
                return self._atom(pres, self._word_term(f.args[1], env))
            raise CodingError(f"unguarded predicate {f.name!r}")
        if isinstance(f, A.ANot):
            return V.negate(self.eval(f.body, env))
        if isinstance(f, A.AAnd):
            return V.all_of((self.eval(g, env) for g in (f.left, f.right)), self.budget)
        if isinstance(f, A.AOr):
            return V.any_of((self.eval(g, env) for g in (f.left, f.right)), self.budget)
        if isinstance(f, A.AImplies):
            return V.implies(self.eval(f.left, env), self.eval(f.right, env), self.budget)
        fo = self._match_first_order(f)
        if fo is not None:
            return self._eval_first_order(*fo, env)
        modal = self._match_modal(f)
        if modal is not None:
            return self._eval_modal(*modal, env)
        raise CodingError(f"unexpected compiled shape {type(f).__name__}")

    def _eval_first_order(self, kind, var, e_name, body, env) -> Verdict:
        pres = env[e_name]
        ident = P.identify_presented_group(pres, self.quotient_bound, self.budget)
        if ident is not None:
            domain = ident.rep_words
            complete = True
        else:
            domain = _short_words(pres.n_generators)
            complete = False
        results = []
        for word in domain:
            child = dict(env)
            child[var] = word
            results.append(self.eval(body, child))
        if kind == "exists":
            out = V.any_of(results, self.budget)
            if out.is_false and not complete:
                return V.unknown(self.budget)
            return out
        out = V.all_of(results, self.budget)
        if out.is_true and not complete:
            return V.unknown(self.budget)
        return out

    def _eval_modal(self, kind, e_next, h_var, e_src, pairs, val, env) -> Verdict:
        pres = env[e_src]
        if kind == "box":
            if all(
                P.derives_trivial(pres, env[src], self.budget).is_true
                for src, _ in pairs
            ) and self._holds_under_identity(val):
                return V.true(
                    proof_backed=True,
                    evidence="identity-valued words stay identity-valued",
                )
        saw_unknown = False
        for target in standard_targets():
            for hc in verified_homs(pres, target, self.budget):
                child = dict(env)
                child[e_next] = target
                child[h_var] = hc
                for src, img in pairs:
                    child[img] = P.apply_hom_code(hc, env[src])
                got = self.eval(val, child)
                if kind == "dia" and got.is_true:
                    return V.true(evidence=(target, hc))
                if kind == "box" and got.is_false:
                    return V.false(evidence=(target, hc))
                if got.is_unknown:
                    saw_unknown = True
        return V.unknown(self.budget)

    def _holds_under_identity(self, f: A.AFormula) -> bool:
        """Sound check: the value clause holds whenever every transported
        word names the identity (all word variables read as empty)."""
        if isinstance(f, A.Pred):
            if f.name != "DerivesTrivial":
                return False
            word = self._word_term_identity(f.args[1])
            return word == ()
        if isinstance(f, A.ANot):
            return self._fails_under_identity(f.body)
        if isinstance(f, A.AAnd):
            return self._holds_under_identity(f.left) and self._holds_under_identity(f.right)
        if isinstance(f, A.AOr):
            return self._holds_under_identity(f.left) or self._holds_under_identity(f.right)
        if isinstance(f, A.AImplies):
            return self._fails_under_identity(f.left) or self._holds_under_identity(f.right)
        fo = self._match_first_order(f)
        if fo is not None:
            kind, var, _, body = fo
            if kind == "exists":
                return self._holds_under_identity(body)
            return False
        modal = self._match_modal(f)
        if modal is not None:
            return self._holds_under_identity(modal[5])
        return False

    def _fails_under_identity(self, f: A.AFormula) -> bool:
        if isinstance(f, A.Pred):
            return False
        if isinstance(f, A.ANot):
            return self._holds_under_identity(f.body)
        if isinstance(f, A.AAnd):
            return self._fails_under_identity(f.left) or self._fails_under_identity(f.right)
        if isinstance(f, A.AOr):
            return self._fails_under_identity(f.left) and self._fails_under_identity(f.right)
        if isinstance(f, A.AImplies):
            return self._holds_under_identity(f.left) and self._fails_under_identity(f.right)
        fo = self._match_first_order(f)
        if fo is not None:
            kind, var, _, body = fo
            if kind == "forall":
                return self._fails_under_identity(body)
            return False
        return False

    def _word_term_identity(self, t: A.ATerm) -> P.GroupWord:
        if isinstance(t, A.Fn):
            if t.name == "empty_word":
                return ()
            if t.name == "concat":
                return P.concat_words(
                    self._word_term_identity(t.args[0]),
                    self._word_term_identity(t.args[1]),
                )
            if t.name == "invert":
                return P.invert_word(self._word_term_identity(t.args[0]))
        if isinstance(t, A.AVar):
            return ()
        raise CodingError(f"cannot interpret word term {t!r}")


def eval_valpred_bounded(
    compiled: A.AFormula,
    e_code: int,
    w_codes: tuple[int, ...],
    budget: int = 10**4,
    quotient_bound: int = 8,
) -> Verdict:
    """Three-valued interpretation of a compiled formula: derivation
    existence runs the word-problem search, and the coded modal quantifiers
    range over a fixed enumeration of tiny presentations with verified
    homomorphism codes."""
    pres = decode_presentation(e_code)
    if pres is None:
        raise CodingError("e is not a presentation code")
    if pres.n_generators > 2 or len(pres.relators) > 3:
        raise CodingError("bounded interpretation expects at most 2 generators, 3 relators")
    env: dict = {"e": pres}
    for i, wc in enumerate(w_codes):
        word = decode_word(wc)
        if word is None:
            raise CodingError(f"w{i + 1} is not a word code")
        if not all(1 <= abs(letter) <= pres.n_generators for letter in word):
            raise CodingError(f"w{i + 1} is not a word over the presentation")
        env[f"w{i + 1}"] = word
    ev = _ValPredEvaluator(budget, quotient_bound)
    return ev.eval(compiled, env)
