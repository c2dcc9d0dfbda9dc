"""Propositional modal logic over finite frames, substitution into the
group language, and the button/dial suites.

Buttons and dials are the control statements behind the validity results:
a button can be made permanently true by some homomorphism and then stays
true; a dial family has exactly one member true anywhere, every value
reachable from everywhere.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import evaluate as E
from . import formulas as F
from . import groups as G
from . import presentations as P
from . import verdict as V


class FrameSizeError(ValueError):
    pass


class MissingAtomError(KeyError):
    pass


# ---------------------------------------------------------------------------
# Propositional formulas and frames


class PropFormula:
    __slots__ = ()


@dataclass(frozen=True)
class PAtom(PropFormula):
    name: str


@dataclass(frozen=True)
class PNot(PropFormula):
    body: PropFormula


@dataclass(frozen=True)
class PAnd(PropFormula):
    left: PropFormula
    right: PropFormula


@dataclass(frozen=True)
class POr(PropFormula):
    left: PropFormula
    right: PropFormula


@dataclass(frozen=True)
class PImplies(PropFormula):
    left: PropFormula
    right: PropFormula


@dataclass(frozen=True)
class PBox(PropFormula):
    body: PropFormula


@dataclass(frozen=True)
class PDia(PropFormula):
    body: PropFormula


def atoms_of(f: PropFormula) -> frozenset[str]:
    if isinstance(f, PAtom):
        return frozenset({f.name})
    if isinstance(f, (PNot, PBox, PDia)):
        return atoms_of(f.body)
    if isinstance(f, (PAnd, POr, PImplies)):
        return atoms_of(f.left) | atoms_of(f.right)
    raise TypeError(f"not a propositional formula: {f!r}")


@dataclass(frozen=True)
class Frame:
    size: int
    relation: frozenset[tuple[int, int]]

    def __post_init__(self):
        for a, b in self.relation:
            if not (0 <= a < self.size and 0 <= b < self.size):
                raise FrameSizeError("relation edge out of range")

    def sees(self, a: int, b: int) -> bool:
        return (a, b) in self.relation


def frame_class(frame: Frame) -> frozenset[str]:
    n, r = frame.size, frame.relation
    out = set()
    if all((a, a) in r for a in range(n)):
        out.add("reflexive")
    if all(
        (a, c) in r
        for a, b in r
        for b2, c in r
        if b2 == b
    ):
        out.add("transitive")
    if all((b, a) in r for a, b in r):
        out.add("symmetric")
    directed = True
    for w in range(n):
        for u in range(n):
            if (w, u) not in r:
                continue
            for v in range(n):
                if (w, v) not in r:
                    continue
                if not any((u, z) in r and (v, z) in r for z in range(n)):
                    directed = False
    if directed:
        out.add("directed")
    return frozenset(out)


def _eval_prop(frame: Frame, valuation, world: int, f: PropFormula) -> bool:
    if isinstance(f, PAtom):
        return (f.name, world) in valuation
    if isinstance(f, PNot):
        return not _eval_prop(frame, valuation, world, f.body)
    if isinstance(f, PAnd):
        return _eval_prop(frame, valuation, world, f.left) and _eval_prop(
            frame, valuation, world, f.right
        )
    if isinstance(f, POr):
        return _eval_prop(frame, valuation, world, f.left) or _eval_prop(
            frame, valuation, world, f.right
        )
    if isinstance(f, PImplies):
        return (not _eval_prop(frame, valuation, world, f.left)) or _eval_prop(
            frame, valuation, world, f.right
        )
    if isinstance(f, PBox):
        return all(
            _eval_prop(frame, valuation, v, f.body)
            for v in range(frame.size)
            if frame.sees(world, v)
        )
    if isinstance(f, PDia):
        return any(
            _eval_prop(frame, valuation, v, f.body)
            for v in range(frame.size)
            if frame.sees(world, v)
        )
    raise TypeError(f"not a propositional formula: {f!r}")


def frame_validates(frame: Frame, f: PropFormula) -> bool:
    """Truth at every world under every valuation (exhaustive)."""
    atoms = sorted(atoms_of(f))
    if frame.size > 5 or len(atoms) > 3:
        raise FrameSizeError("exhaustive validity check capped at 5 worlds, 3 atoms")
    cells = [(a, w) for a in atoms for w in range(frame.size)]
    for bits in itertools.product((False, True), repeat=len(cells)):
        valuation = frozenset(c for c, bit in zip(cells, bits) if bit)
        for world in range(frame.size):
            if not _eval_prop(frame, valuation, world, f):
                return False
    return True


def enumerate_frames(size: int):
    """All frames on `size` worlds (deterministic order)."""
    pairs = [(a, b) for a in range(size) for b in range(size)]
    for bits in itertools.product((False, True), repeat=len(pairs)):
        yield Frame(size, frozenset(p for p, bit in zip(pairs, bits) if bit))


# ---------------------------------------------------------------------------
# Axiom systems

_P, _Q = PAtom("p"), PAtom("q")

AXIOM_K = PImplies(PBox(PImplies(_P, _Q)), PImplies(PBox(_P), PBox(_Q)))
AXIOM_T = PImplies(PBox(_P), _P)
AXIOM_4 = PImplies(PBox(_P), PBox(PBox(_P)))
AXIOM_G2 = PImplies(PDia(PBox(_P)), PBox(PDia(_P)))
AXIOM_5 = PImplies(PDia(_P), PBox(PDia(_P)))
# equivalent to axiom 5 over S4; this is the shape the control suites test,
# since a single unpushed button falsifies it
AXIOM_B_DIA = PImplies(PDia(PBox(_P)), _P)


def axiom_set(system: str) -> tuple[PropFormula, ...]:
    if system == "S4":
        return (AXIOM_K, AXIOM_T, AXIOM_4)
    if system == "S4.2":
        return (AXIOM_K, AXIOM_T, AXIOM_4, AXIOM_G2)
    if system == "S5":
        return (AXIOM_K, AXIOM_T, AXIOM_4, AXIOM_5)
    raise ValueError(f"unknown system {system!r}; expected S4, S4.2, or S5")


def substitute_instance(f: PropFormula, atom_map: dict[str, F.Formula]) -> F.Formula:
    """Replace atoms by group formulas, modalities passing through."""
    if isinstance(f, PAtom):
        try:
            return atom_map[f.name]
        except KeyError:
            raise MissingAtomError(f.name) from None
    if isinstance(f, PNot):
        return F.Not(substitute_instance(f.body, atom_map))
    if isinstance(f, PAnd):
        return F.And(
            substitute_instance(f.left, atom_map), substitute_instance(f.right, atom_map)
        )
    if isinstance(f, POr):
        return F.Or(
            substitute_instance(f.left, atom_map), substitute_instance(f.right, atom_map)
        )
    if isinstance(f, PImplies):
        return F.Implies(
            substitute_instance(f.left, atom_map), substitute_instance(f.right, atom_map)
        )
    if isinstance(f, PBox):
        return F.Box(substitute_instance(f.body, atom_map))
    if isinstance(f, PDia):
        return F.Dia(substitute_instance(f.body, atom_map))
    raise TypeError(f"not a propositional formula: {f!r}")


# ---------------------------------------------------------------------------
# Dial suite: group-size sentences


def dial_family(max_n: int) -> list[F.Formula]:
    if max_n < 2:
        raise ValueError("a dial needs at least two values")
    return [F.size_exactly(n) for n in range(1, max_n)] + [F.size_at_least(max_n)]


@dataclass
class DialReport:
    max_n: int
    exactly_one: list[tuple[str, bool]] = field(default_factory=list)
    reachability: list[tuple[str, int, str]] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def exactly_one_ok(self) -> int:
        return sum(ok for _, ok in self.exactly_one)

    def records(self) -> list[str]:
        ok = self.exactly_one_ok
        total = len(self.exactly_one)
        reach = len(self.reachability)
        expect = total * self.max_n
        out = [
            f"suite=dials max={self.max_n} exactly_one={ok}/{total} "
            f"reachable={reach}/{expect} failures={len(self.failures)}"
        ]
        out.extend(f"failure {msg}" for msg in self.failures)
        return out

    @property
    def passed(self) -> bool:
        return (
            not self.failures
            and self.exactly_one_ok == len(self.exactly_one)
            and len(self.reachability) == len(self.exactly_one) * self.max_n
        )


def dial_suite(max_n: int, cfg: E.BoundConfig | None = None) -> DialReport:
    """Exactly-one and reachability checks for the size dial family."""
    cfg = cfg or E.BoundConfig()
    dials = dial_family(max_n)
    worlds = G.catalog(cfg.target_max_order)
    report = DialReport(max_n)
    truth_cache: dict[tuple[int, int], bool] = {}

    def dial_true_at(i: int, grp: G.FiniteGroup) -> bool:
        key = (i, id(grp))
        if key not in truth_cache:
            verdict = E.evaluate(E.World(grp), dials[i], cfg)
            if not verdict.resolved:
                raise V.InvariantError("size sentences must evaluate exactly")
            truth_cache[key] = verdict.is_true
        return truth_cache[key]

    for grp in worlds:
        holds = [dial_true_at(i, grp) for i in range(len(dials))]
        report.exactly_one.append((grp.label, sum(holds) == 1))
        if sum(holds) != 1:
            report.failures.append(f"group={grp.label} holds={holds}")
        for i in range(len(dials)):
            reached = None
            for target in worlds:
                if dial_true_at(i, target) and G.enumerate_homs(grp, target):
                    reached = target
                    break
            if reached is None:
                report.failures.append(f"group={grp.label} dial={i} unreachable")
            else:
                report.reachability.append((grp.label, i, reached.label))
    return report


# ---------------------------------------------------------------------------
# Button suite: killing a parameter


@dataclass
class ButtonReport:
    group_label: str
    element: int
    initially_false: bool = False
    push_verdict: V.Verdict | None = None
    pushes: int = 0
    continuations_checked: int = 0
    persistent: bool = True
    axiom_instance_false: bool = False

    @property
    def passed(self) -> bool:
        return (
            self.initially_false
            and self.push_verdict is not None
            and self.push_verdict.is_true
            and self.pushes > 0
            and self.persistent
            and self.axiom_instance_false
        )

    def records(self) -> list[str]:
        return [
            f"suite=buttons group={self.group_label} element={self.element} "
            f"initially_false={self.initially_false} pushed={self.pushes} "
            f"continuations={self.continuations_checked} persistent={self.persistent} "
            f"axiom_instance_false={self.axiom_instance_false} passed={self.passed}"
        ]


def button_suite(grp: G.FiniteGroup, a: int, cfg: E.BoundConfig | None = None) -> ButtonReport:
    """The statement a = e as a button: false now, pushable by a
    homomorphism killing a, and permanently true afterwards."""
    if a == 0:
        raise ValueError("the button needs a non-identity parameter")
    cfg = cfg or E.BoundConfig()
    report = ButtonReport(grp.label, a)
    world = E.World(grp, (a,), ("a",))
    statement = F.Eq(F.Var("a"), F.E)

    report.initially_false = E.evaluate(world, statement, cfg).is_false
    report.push_verdict = E.evaluate(world, F.Dia(F.Box(statement)), cfg)

    targets = G.catalog(cfg.target_max_order)
    for target in targets:
        for hom in G.enumerate_homs(grp, target):
            if hom.map[a] != 0:
                continue
            report.pushes += 1
            for further in targets:
                for cont in G.enumerate_homs(target, further):
                    report.continuations_checked += 1
                    if cont.map[hom.map[a]] != 0:
                        report.persistent = False

    instance = substitute_instance(AXIOM_B_DIA, {"p": statement})
    verdict = E.evaluate(world, instance, cfg)
    report.axiom_instance_false = verdict.is_false
    return report


# ---------------------------------------------------------------------------
# Divisibility buttons over presentations


@dataclass
class DivisibilityEntry:
    prime: int
    holds: bool
    forced: bool  # true when the prime misses the element order
    amalgam: str | None = None
    amalgam_label: str | None = None
    root_relator_trivial: bool | None = None


@dataclass
class DivisibilityReport:
    base_label: str
    element_order: int
    entries: list[DivisibilityEntry] = field(default_factory=list)

    def records(self) -> list[str]:
        out = [
            f"suite=divisibility base={self.base_label} order={self.element_order}"
        ]
        for e in self.entries:
            line = (
                f"prime={e.prime} holds={e.holds} forced={e.forced}"
            )
            if e.amalgam is not None:
                line += (
                    f" amalgam_identified={e.amalgam_label}"
                    f" root_relator_trivial={e.root_relator_trivial}"
                )
            out.append(line)
        return out


def divisibility_button_report(
    primes: list[int],
    base: P.FinitePresentation,
    a: P.GroupWord,
    max_order: int = 8,
    budget: int = 10**4,
) -> DivisibilityReport:
    """Per prime: does the element have a p-th root, is that forced by its
    order, and if unpushed, the finite-root amalgam that pushes it."""
    ident = P.identify_presented_group(base, max_order, budget)
    if ident is None:
        raise ValueError("the base presentation was not identified as a finite group")
    elem = ident.word_element(a)
    order = G.element_order(ident.group, elem)
    report = DivisibilityReport(ident.catalog_label or ident.group.label, order)
    for p in primes:
        holds = G.is_p_divisible(ident.group, elem, p)
        forced = order % p != 0
        if forced and not holds:
            raise V.InvariantError(
                f"prime {p} misses the element order {order} but the root is absent"
            )
        entry = DivisibilityEntry(p, holds, forced)
        if not holds and order % p == 0:
            amalgam = P.amalgam_finite_root(base, a, order, p)
            entry.amalgam = P.render_presentation(amalgam)
            root_rel = tuple(a) + (-(amalgam.n_generators),) * p
            entry.root_relator_trivial = P.derives_trivial(
                amalgam, root_rel, budget
            ).is_true
            amalgam_ident = P.identify_presented_group(amalgam, max_order, budget)
            entry.amalgam_label = (
                amalgam_ident.catalog_label if amalgam_ident is not None else None
            )
        report.entries.append(entry)
    return report
