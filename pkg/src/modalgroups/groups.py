"""Concrete finite groups as Cayley tables, a deduplicated catalog, and
exhaustive homomorphism enumeration.

Elements are dense integer indices with index 0 the identity.  Tables are
tuples of tuples so groups are hashable and safely shared.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .verdict import InvariantError


class InvalidGroupError(ValueError):
    pass


class GroupSizeError(ValueError):
    pass


HARD_MAX_ORDER = 12  # catalog cap; constructors allow somewhat larger tables
CONSTRUCTOR_MAX_ORDER = 48


@dataclass(frozen=True)
class FiniteGroup:
    table: tuple[tuple[int, ...], ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(self.table))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if not isinstance(other, FiniteGroup):
            return NotImplemented
        return self.table == other.table

    @property
    def order(self) -> int:
        return len(self.table)

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    def inverse(self, a: int) -> int:
        return self.table[a].index(0)

    def power(self, a: int, k: int) -> int:
        if k < 0:
            return self.power(self.inverse(a), -k)
        out = 0
        for _ in range(k):
            out = self.table[out][a]
        return out

    def elements(self) -> range:
        return range(self.order)

    def relabel(self, label: str) -> "FiniteGroup":
        return FiniteGroup(self.table, label)

    def __repr__(self):
        return f"FiniteGroup(order={self.order}, label={self.label!r})"


@dataclass(frozen=True)
class Homomorphism:
    source: FiniteGroup
    target: FiniteGroup
    map: tuple[int, ...]

    def __call__(self, a: int) -> int:
        return self.map[a]

    def is_trivial(self) -> bool:
        return all(x == 0 for x in self.map)


def validate_table(table) -> None:
    """Reject tables violating identity, Latin-square, inverse, or
    associativity conditions."""
    n = len(table)
    if n == 0:
        raise InvalidGroupError("empty table")
    for row in table:
        if len(row) != n:
            raise InvalidGroupError("table is not square")
        if any(not (0 <= x < n) for x in row):
            raise InvalidGroupError("entry out of range")
    for a in range(n):
        if table[0][a] != a or table[a][0] != a:
            raise InvalidGroupError("index 0 is not a two-sided identity")
    full = frozenset(range(n))
    for a in range(n):
        if frozenset(table[a]) != full:
            raise InvalidGroupError(f"row {a} is not a permutation")
        if frozenset(table[b][a] for b in range(n)) != full:
            raise InvalidGroupError(f"column {a} is not a permutation")
    for a in range(n):
        if 0 not in table[a]:
            raise InvalidGroupError(f"element {a} has no inverse")
    for a in range(n):
        ta = table[a]
        for b in range(n):
            tab = table[ta[b]]
            tb = table[b]
            for c in range(n):
                if tab[c] != ta[tb[c]]:
                    raise InvalidGroupError(f"associativity fails at ({a},{b},{c})")


def make_group(table, label: str = "") -> FiniteGroup:
    table = tuple(tuple(row) for row in table)
    validate_table(table)
    return FiniteGroup(table, label)


def _from_elements(elems: list, op, label: str) -> FiniteGroup:
    if len(elems) > CONSTRUCTOR_MAX_ORDER:
        raise GroupSizeError(f"order {len(elems)} exceeds constructor cap")
    index = {x: i for i, x in enumerate(elems)}
    table = tuple(tuple(index[op(a, b)] for b in elems) for a in elems)
    return make_group(table, label)


def make_cyclic(n: int) -> FiniteGroup:
    if n < 1:
        raise GroupSizeError("order must be at least 1")
    return _from_elements(list(range(n)), lambda a, b: (a + b) % n, f"C{n}")


def make_product(g: FiniteGroup, h: FiniteGroup) -> FiniteGroup:
    elems = [(a, b) for a in g.elements() for b in h.elements()]
    label = f"{g.label or 'G'}x{h.label or 'H'}"
    return _from_elements(
        elems, lambda p, q: (g.mul(p[0], q[0]), h.mul(p[1], q[1])), label
    )


def make_dihedral(n: int) -> FiniteGroup:
    """Dihedral group of order 2n: pairs (rotation, flip)."""
    if n < 1:
        raise GroupSizeError("order must be at least 1")
    elems = [(r, f) for f in (0, 1) for r in range(n)]

    def op(p, q):
        r1, f1 = p
        r2, f2 = q
        return ((r1 + (r2 if f1 == 0 else -r2)) % n, f1 ^ f2)

    return _from_elements(elems, op, f"D{n}")


def make_symmetric(n: int) -> FiniteGroup:
    if not 1 <= n <= 4:
        raise GroupSizeError("symmetric groups are capped at degree 4")
    perms = sorted(itertools.permutations(range(n)))

    def op(p, q):  # (p*q)(i) = p(q(i))
        return tuple(p[q[i]] for i in range(n))

    return _from_elements(perms, op, f"S{n}")


def make_alternating4() -> FiniteGroup:
    def sign(p):
        s = 1
        for i in range(4):
            for j in range(i + 1, 4):
                if p[i] > p[j]:
                    s = -s
        return s

    perms = [p for p in sorted(itertools.permutations(range(4))) if sign(p) == 1]

    def op(p, q):
        return tuple(p[q[i]] for i in range(4))

    return _from_elements(perms, op, "A4")


def make_dicyclic(n: int) -> FiniteGroup:
    """Dicyclic group of order 4n (n=2 is the quaternion group)."""
    if n < 1:
        raise GroupSizeError("order must be at least 1")
    elems = [(i, j) for j in (0, 1) for i in range(2 * n)]

    def op(p, q):
        i, j = p
        k, l = q
        if j == 0:
            return ((i + k) % (2 * n), l)
        if l == 0:
            return ((i - k) % (2 * n), 1)
        return ((i - k + n) % (2 * n), 0)

    return _from_elements(elems, op, f"Dic{n}")


def make_quaternion8() -> FiniteGroup:
    return make_dicyclic(2).relabel("Q8")


# ---------------------------------------------------------------------------
# Element-level operations


@lru_cache(maxsize=None)
def element_order(g: FiniteGroup, a: int) -> int:
    x = a
    k = 1
    while x != 0:
        x = g.mul(x, a)
        k += 1
    return k


@lru_cache(maxsize=None)
def _closure_cached(g: FiniteGroup, seed: tuple[int, ...]) -> frozenset[int]:
    out = {0}
    while True:
        added = False
        for s in seed:
            for x in list(out):
                for y in (g.mul(x, s), g.mul(s, x)):
                    if y not in out:
                        out.add(y)
                        added = True
        if not added:
            return frozenset(out)


def subgroup_closure(g: FiniteGroup, seed) -> frozenset[int]:
    """Least subgroup containing the seed tuple (empty seed gives {e})."""
    return _closure_cached(g, tuple(sorted(set(seed))))


@lru_cache(maxsize=None)
def center(g: FiniteGroup) -> frozenset[int]:
    return frozenset(
        z for z in g.elements() if all(g.mul(z, a) == g.mul(a, z) for a in g.elements())
    )


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    d = 2
    while d * d <= p:
        if p % d == 0:
            return False
        d += 1
    return True


def is_p_divisible(g: FiniteGroup, a: int, p: int) -> bool:
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    return any(g.power(y, p) == a for y in g.elements())


@lru_cache(maxsize=None)
def order_profile(g: FiniteGroup) -> tuple[int, ...]:
    return tuple(sorted(element_order(g, a) for a in g.elements()))


@lru_cache(maxsize=None)
def generating_set(g: FiniteGroup) -> tuple[int, ...]:
    """Greedy generating set: repeatedly add the element that grows the
    closure most (ties to the smallest index)."""
    gens: list[int] = []
    current: frozenset[int] = frozenset({0})
    while len(current) < g.order:
        best, best_size = None, -1
        for x in g.elements():
            if x in current:
                continue
            size = len(subgroup_closure(g, tuple(gens) + (x,)))
            if size > best_size:
                best, best_size = x, size
        gens.append(best)
        current = subgroup_closure(g, tuple(gens))
    return tuple(gens)


# ---------------------------------------------------------------------------
# Homomorphisms


@lru_cache(maxsize=None)
def _construction_order(g: FiniteGroup) -> tuple[tuple[int, int, int], ...]:
    """BFS cover of g from the identity: entries (element, parent, gen_index),
    so element = parent * gens[gen_index]."""
    gens = generating_set(g)
    seen = {0}
    steps = []
    frontier = [0]
    while frontier:
        next_frontier = []
        for a in frontier:
            for i, s in enumerate(gens):
                b = g.mul(a, s)
                if b not in seen:
                    seen.add(b)
                    steps.append((b, a, i))
                    next_frontier.append(b)
        frontier = next_frontier
    if len(seen) != g.order:
        raise InvariantError("generating set does not generate")
    return tuple(steps)


def _extend_map(g: FiniteGroup, h: FiniteGroup, gens, images) -> tuple[int, ...] | None:
    mapping = [0] * g.order
    for b, a, i in _construction_order(g):
        mapping[b] = h.mul(mapping[a], images[i])
    for a in g.elements():
        ma = mapping[a]
        for i, s in enumerate(gens):
            if mapping[g.mul(a, s)] != h.mul(ma, images[i]):
                return None
    return tuple(mapping)


@lru_cache(maxsize=None)
def enumerate_homs(g: FiniteGroup, h: FiniteGroup) -> tuple[Homomorphism, ...]:
    """All homomorphisms g -> h, by generator images in lexicographic order."""
    gens = generating_set(g)
    if not gens:  # trivial source
        return (Homomorphism(g, h, (0,)),)
    candidates = []
    for s in gens:
        k = element_order(g, s)
        candidates.append(tuple(y for y in h.elements() if k % element_order(h, y) == 0))
    out = []
    for images in itertools.product(*candidates):
        mapping = _extend_map(g, h, gens, images)
        if mapping is not None:
            out.append(Homomorphism(g, h, mapping))
    return tuple(out)


def is_valid_homomorphism(hom: Homomorphism) -> bool:
    g, h = hom.source, hom.target
    if len(hom.map) != g.order or hom.map[0] != 0:
        return False
    return all(
        hom.map[g.mul(a, b)] == h.mul(hom.map[a], hom.map[b])
        for a in g.elements()
        for b in g.elements()
    )


def compose_homs(first: Homomorphism, second: Homomorphism) -> Homomorphism:
    if first.target != second.source:
        raise ValueError("homomorphisms do not compose")
    return Homomorphism(
        first.source, second.target, tuple(second.map[x] for x in first.map)
    )


@lru_cache(maxsize=None)
def is_isomorphic(g: FiniteGroup, h: FiniteGroup) -> bool:
    if g.order != h.order:
        return False
    if order_profile(g) != order_profile(h):
        return False
    if len(center(g)) != len(center(h)):
        return False
    gens = generating_set(g)
    if not gens:
        return True
    buckets = []
    for s in gens:
        k = element_order(g, s)
        buckets.append(tuple(y for y in h.elements() if element_order(h, y) == k))
    for images in itertools.product(*buckets):
        mapping = _extend_map(g, h, gens, images)
        if mapping is not None and len(set(mapping)) == g.order:
            return True
    return False


# ---------------------------------------------------------------------------
# Catalog


def _catalog_candidates(max_order: int) -> list[FiniteGroup]:
    out: list[FiniteGroup] = []
    for n in range(1, max_order + 1):
        out.append(make_cyclic(n))
    for n in range(3, max_order // 2 + 1):
        out.append(make_dihedral(n))
    for n in range(1, 5):
        candidate = make_symmetric(n)
        if candidate.order <= max_order:
            out.append(candidate)
    for n in range(2, max_order // 4 + 1):
        out.append(make_dicyclic(n))
    if max_order >= 12:
        out.append(make_alternating4())
    # close under direct products
    queue = list(out)
    while queue:
        g = queue.pop()
        for h in list(out):
            if g.order * h.order <= max_order:
                p = make_product(g, h)
                if not any(is_isomorphic(p, k) for k in out if k.order == p.order):
                    out.append(p)
                    queue.append(p)
    return out


def _abelian_forms(n: int) -> list[tuple[FiniteGroup, str]]:
    """Products of cyclic groups of total order n, with display labels."""
    forms = []

    def extend(remaining: int, factors: tuple[int, ...]):
        if remaining == 1:
            if factors:
                g = make_cyclic(factors[0])
                for m in factors[1:]:
                    g = make_product(g, make_cyclic(m))
                forms.append((g, "x".join(f"C{m}" for m in factors)))
            return
        start = factors[-1] if factors else 2
        for d in range(start, remaining + 1):
            if remaining % d == 0:
                extend(remaining // d, factors + (d,))

    extend(n, ())
    return forms


@lru_cache(maxsize=None)
def canonical_label(g: FiniteGroup) -> str:
    n = g.order
    if n == 1:
        return "C1"
    if any(len(subgroup_closure(g, (x,))) == n for x in g.elements()):
        return f"C{n}"
    for form, label in _abelian_forms(n):
        if is_isomorphic(g, form):
            return label
    named = []
    if n == 6:
        named.append((make_symmetric(3), "S3"))
    if n % 2 == 0 and n // 2 >= 3:
        named.append((make_dihedral(n // 2), f"D{n // 2}"))
    if n % 4 == 0 and n // 4 >= 2:
        label = "Q8" if n == 8 else f"Dic{n // 4}"
        named.append((make_dicyclic(n // 4), label))
    if n == 12:
        named.append((make_alternating4(), "A4"))
    if n == 24:
        named.append((make_symmetric(4), "S4"))
    for form, label in named:
        if is_isomorphic(g, form):
            return label
    return g.label or f"G{n}"


@lru_cache(maxsize=None)
def catalog(max_order: int) -> tuple[FiniteGroup, ...]:
    """One representative per isomorphism class of order <= max_order,
    deterministically ordered."""
    if not 1 <= max_order <= HARD_MAX_ORDER:
        raise GroupSizeError(
            f"catalog order must be between 1 and {HARD_MAX_ORDER}, got {max_order}"
        )
    chosen: list[FiniteGroup] = []
    for cand in _catalog_candidates(max_order):
        if cand.order > max_order:
            continue
        if not any(is_isomorphic(cand, g) for g in chosen if g.order == cand.order):
            chosen.append(cand)
    chosen.sort(key=lambda g: (g.order, order_profile(g), g.table))
    return tuple(g.relabel(canonical_label(g)) for g in chosen)


# ---------------------------------------------------------------------------
# Exhaustive Cayley-table search (left-regular representation backtracking)


def _uniform_cycle_perms(n: int, first_image: int, length: int) -> list[tuple[int, ...]]:
    """Permutations of 0..n-1 that are products of n/length cycles of equal
    `length`, with 0 -> first_image."""
    if n % length:
        return []
    out = []

    def build(perm: dict[int, int], remaining: frozenset[int]):
        if not remaining:
            out.append(tuple(perm[i] for i in range(n)))
            return
        start = min(remaining)
        # choose the rest of the cycle through `start`
        def extend(cycle: list[int], pool: frozenset[int]):
            if len(cycle) == length:
                for i, x in enumerate(cycle):
                    perm[x] = cycle[(i + 1) % length]
                build(perm, pool)
                for x in cycle:
                    del perm[x]
                return
            for nxt in sorted(pool):
                extend(cycle + [nxt], pool - {nxt})

        if start == 0 and first_image != 0:
            extend([0, first_image], remaining - {0, first_image})
        else:
            extend([start], remaining - {start})

    if first_image == 0:
        return []
    build({}, frozenset(range(n)))
    return out


def enumerate_group_tables(n: int) -> list[FiniteGroup]:
    """Every group structure on {0..n-1} with identity 0, one table per
    isomorphism class.  Exhaustive: searches sharply transitive permutation
    sets closed under composition (the left-regular representations)."""
    if not 1 <= n <= 8:
        raise GroupSizeError("exhaustive table search is capped at order 8")
    if n == 1:
        return [make_group(((0,),), "T1")]
    identity = tuple(range(n))
    divisors = [d for d in range(2, n + 1) if n % d == 0]
    found: list[FiniteGroup] = []

    def close(rows: dict[int, tuple[int, ...]]) -> dict[int, tuple[int, ...]] | None:
        rows = dict(rows)
        queue = list(rows)
        while queue:
            a = queue.pop()
            for b in list(rows):
                for x, y in ((a, b), (b, a)):
                    comp = tuple(rows[x][rows[y][i]] for i in range(n))
                    c = comp[0]
                    if c in rows:
                        if rows[c] != comp:
                            return None
                    else:
                        if len(rows) == n:
                            return None
                        rows[c] = comp
                        queue.append(c)
        return rows

    def search(rows: dict[int, tuple[int, ...]]):
        if len(rows) == n:
            table = tuple(rows[a] for a in range(n))
            try:
                validate_table(table)
            except InvalidGroupError:
                return
            g = FiniteGroup(table, f"T{n}")
            if not any(is_isomorphic(g, k) for k in found):
                found.append(g)
            return
        a = min(x for x in range(n) if x not in rows)
        for length in divisors:
            for perm in _uniform_cycle_perms(n, a, length):
                closed = close({**rows, a: perm})
                if closed is not None:
                    search(closed)

    search({0: identity})
    return found


# ---------------------------------------------------------------------------
# Group file format


def render_group_file(g: FiniteGroup) -> str:
    lines = [f"order {g.order}"]
    for row in g.table:
        lines.append(" ".join(str(x) for x in row))
    if g.label:
        lines.append(f"label {g.label}")
    return "\n".join(lines) + "\n"


def parse_group_file(text: str) -> FiniteGroup:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("order "):
        raise InvalidGroupError("group file must start with 'order n'")
    try:
        n = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise InvalidGroupError("bad order line") from None
    if len(lines) < n + 1:
        raise InvalidGroupError("truncated Cayley table")
    table = []
    for ln in lines[1 : n + 1]:
        try:
            row = tuple(int(x) for x in ln.split())
        except ValueError:
            raise InvalidGroupError(f"bad table row {ln!r}") from None
        table.append(row)
    label = ""
    if len(lines) > n + 1:
        trailer = lines[n + 1]
        if not trailer.startswith("label "):
            raise InvalidGroupError(f"unexpected trailer {trailer!r}")
        label = trailer[len("label ") :]
    return make_group(table, label)
