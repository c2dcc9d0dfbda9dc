"""Bounded three-valued evaluation of modal group formulas.

A world is a finite group plus a parameter assignment.  Booleans and
first-order quantifiers are evaluated exactly over the world's group.
The modal operators quantify over all groups, which no finite search can
exhaust, so modal verdicts obey a soundness contract:

  * True for a diamond claim always carries an exhibited witness
    homomorphism (or a homomorphism-law argument valid for all targets).
  * False for a box claim always carries an exhibited counterexample.
  * Everything else at the bound is Unknown, except formulas whose
    positive direction holds in every homomorphic image (the commutation
    membership shape), which are promoted to proof-backed True.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import formulas as F
from . import groups as G
from . import verdict as V
from .verdict import Verdict


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class World:
    group: G.FiniteGroup
    params: tuple[int, ...] = ()
    param_names: tuple[str, ...] = ()

    def __post_init__(self):
        names = self.param_names
        if not names and self.params:
            names = tuple(f"p{i}" for i in range(len(self.params)))
            object.__setattr__(self, "param_names", names)
        if len(names) != len(self.params):
            raise EvalError("parameter names and values differ in length")
        if any(not (0 <= p < self.group.order) for p in self.params):
            raise EvalError("parameter index out of range")


@dataclass(frozen=True)
class BoundConfig:
    target_max_order: int = 8
    modal_depth_limit: int = 4
    node_budget: int = 10**6

    def __post_init__(self):
        if self.target_max_order < 1 or self.modal_depth_limit < 1 or self.node_budget < 1:
            raise EvalError("bounds must be positive")


@dataclass(frozen=True)
class Witness:
    target: G.FiniteGroup
    hom: G.Homomorphism
    note: str = ""


def _eval_term(t: F.Term, group: G.FiniteGroup, env: dict[str, int], params: tuple[int, ...]) -> int:
    if isinstance(t, F.Ident):
        return 0
    if isinstance(t, F.Var):
        try:
            return env[t.name]
        except KeyError:
            raise EvalError(f"unassigned free variable {t.name!r}") from None
    if isinstance(t, F.Param):
        try:
            return params[t.index]
        except IndexError:
            raise EvalError(f"parameter ${t.index} is out of range") from None
    if isinstance(t, F.Mul):
        return group.mul(
            _eval_term(t.left, group, env, params), _eval_term(t.right, group, env, params)
        )
    if isinstance(t, F.Inv):
        return group.inverse(_eval_term(t.inner, group, env, params))
    raise TypeError(f"not a term: {t!r}")


def _match_commutation(f: F.Formula):
    """Recognize box(forall t (/\\ t*x_i = x_i*t -> t*y = y*t)) and return
    (xs, y) as terms, or None."""
    if not isinstance(f, F.Box):
        return None
    q = f.body
    if not isinstance(q, F.ForAll):
        return None
    t = q.var
    body = q.body
    if not isinstance(body, F.Implies):
        return None

    def commuted_with(eq: F.Formula):
        # t*a = a*t with a not containing t
        if not isinstance(eq, F.Eq):
            return None
        l, r = eq.lhs, eq.rhs
        if not (isinstance(l, F.Mul) and isinstance(r, F.Mul)):
            return None
        if not (isinstance(l.left, F.Var) and l.left.name == t):
            return None
        if not (isinstance(r.right, F.Var) and r.right.name == t):
            return None
        if l.right != r.left:
            return None
        if t in F.term_vars(l.right):
            return None
        return l.right

    def conjuncts(g: F.Formula):
        if isinstance(g, F.And):
            return conjuncts(g.left) + conjuncts(g.right)
        return [g]

    xs = []
    for part in conjuncts(body.left):
        a = commuted_with(part)
        if a is None:
            return None
        xs.append(a)
    y = commuted_with(body.right)
    if y is None:
        return None
    return tuple(xs), y


class _Evaluator:
    def __init__(self, cfg: BoundConfig):
        self.cfg = cfg
        self.memo: dict = {}
        self.nodes = 0
        self.targets = G.catalog(cfg.target_max_order)

    # -- bookkeeping

    def _tick(self) -> bool:
        self.nodes += 1
        return self.nodes <= self.cfg.node_budget

    def _unknown(self) -> Verdict:
        return V.unknown(self.cfg.target_max_order)

    # -- everywhere / identity-assignment sound rules

    def valid_everywhere(self, f: F.Formula, depth: int) -> bool:
        """Sound check: f holds at every world under every assignment."""
        if isinstance(f, F.Eq):
            if f.lhs == f.rhs:
                return True
            return not (F.term_vars(f.lhs) | F.term_vars(f.rhs)) and not (
                self._has_param(f.lhs) or self._has_param(f.rhs)
            )
        if isinstance(f, F.Not):
            return self.falsified_everywhere(f.body, depth)
        if isinstance(f, F.And):
            return self.valid_everywhere(f.left, depth) and self.valid_everywhere(f.right, depth)
        if isinstance(f, F.Or):
            if f.left == F.Not(f.right) or F.Not(f.left) == f.right:
                return True
            return self.valid_everywhere(f.left, depth) or self.valid_everywhere(f.right, depth)
        if isinstance(f, F.Implies):
            if f.left == f.right:
                return True
            return self.falsified_everywhere(f.left, depth) or self.valid_everywhere(
                f.right, depth
            )
        if isinstance(f, (F.ForAll, F.Exists)):
            return self.valid_everywhere(f.body, depth)
        if isinstance(f, F.Box):
            return self.valid_everywhere(f.body, depth)
        if isinstance(f, F.Dia):
            return self._true_at_some_collapsed_world(f.body, depth)
        return False

    def falsified_everywhere(self, f: F.Formula, depth: int) -> bool:
        """Sound check: f fails at every world under every assignment."""
        if isinstance(f, F.Eq):
            return False
        if isinstance(f, F.Not):
            return self.valid_everywhere(f.body, depth)
        if isinstance(f, F.And):
            return self.falsified_everywhere(f.left, depth) or self.falsified_everywhere(
                f.right, depth
            )
        if isinstance(f, F.Or):
            return self.falsified_everywhere(f.left, depth) and self.falsified_everywhere(
                f.right, depth
            )
        if isinstance(f, F.Implies):
            return self.valid_everywhere(f.left, depth) and self.falsified_everywhere(
                f.right, depth
            )
        if isinstance(f, (F.ForAll, F.Exists)):
            return self.falsified_everywhere(f.body, depth)
        if isinstance(f, F.Dia):
            return self.falsified_everywhere(f.body, depth)
        if isinstance(f, F.Box):
            # the trivial continuation collapses every parameter, so one
            # collapsed counterexample kills box(f.body) at every world
            return self._false_at_some_collapsed_world(f.body, depth)
        return False

    @staticmethod
    def _has_param(t: F.Term) -> bool:
        if isinstance(t, F.Param):
            return True
        if isinstance(t, F.Mul):
            return _Evaluator._has_param(t.left) or _Evaluator._has_param(t.right)
        if isinstance(t, F.Inv):
            return _Evaluator._has_param(t.inner)
        return False

    def _collapsed_env(self, f: F.Formula) -> tuple[dict[str, int], tuple[int, ...]]:
        return {name: 0 for name in F.free_vars(f)}, (0,) * (_max_param_index(f) + 1)

    def _true_at_some_collapsed_world(self, f: F.Formula, depth: int) -> bool:
        if depth <= 0:
            return False
        env, params = self._collapsed_env(f)
        for k in self.targets:
            if self._eval(k, env, params, f, depth - 1).is_true:
                return True
        return False

    def _false_at_some_collapsed_world(self, f: F.Formula, depth: int) -> bool:
        if depth <= 0:
            return False
        env, params = self._collapsed_env(f)
        for k in self.targets:
            if self._eval(k, env, params, f, depth - 1).is_false:
                return True
        return False

    def valid_under_identity(self, f: F.Formula, depth: int) -> bool:
        """Sound check: f holds at every world whose assignment maps every
        parameter and every free variable to the identity."""
        if isinstance(f, F.Eq):
            return True  # all inverse-free terms collapse to the identity
        if isinstance(f, F.Not):
            return self._falsified_under_identity(f.body, depth)
        if isinstance(f, F.And):
            return self.valid_under_identity(f.left, depth) and self.valid_under_identity(
                f.right, depth
            )
        if isinstance(f, F.Or):
            return self.valid_under_identity(f.left, depth) or self.valid_under_identity(
                f.right, depth
            )
        if isinstance(f, F.Implies):
            return self._falsified_under_identity(f.left, depth) or self.valid_under_identity(
                f.right, depth
            )
        if isinstance(f, F.Exists):
            return self.valid_under_identity(f.body, depth)  # witness: the identity
        if isinstance(f, F.Box):
            return self.valid_under_identity(f.body, depth)
        if isinstance(f, F.Dia):
            return self._true_at_some_collapsed_world(f.body, depth)
        return False

    def _falsified_under_identity(self, f: F.Formula, depth: int) -> bool:
        if isinstance(f, F.Eq):
            return False
        if isinstance(f, F.Not):
            return self.valid_under_identity(f.body, depth)
        if isinstance(f, F.And):
            return self._falsified_under_identity(f.left, depth) or self._falsified_under_identity(
                f.right, depth
            )
        if isinstance(f, F.Or):
            return self._falsified_under_identity(f.left, depth) and self._falsified_under_identity(
                f.right, depth
            )
        if isinstance(f, F.Implies):
            return self.valid_under_identity(f.left, depth) and self._falsified_under_identity(
                f.right, depth
            )
        if isinstance(f, F.Exists):
            return self._falsified_under_identity(f.body, depth)
        if isinstance(f, F.Dia):
            return self._falsified_under_identity(f.body, depth)
        if isinstance(f, F.Box):
            return self._false_at_some_collapsed_world(f.body, depth)
        return False

    # -- core recursion

    def _eval(
        self,
        group: G.FiniteGroup,
        env: dict[str, int],
        params: tuple[int, ...],
        f: F.Formula,
        depth: int,
        fast: bool = False,
    ) -> Verdict:
        if not self._tick():
            return self._unknown()
        if isinstance(f, F.Eq):
            same = _eval_term(f.lhs, group, env, params) == _eval_term(
                f.rhs, group, env, params
            )
            return V.true() if same else V.false()
        if isinstance(f, F.Not):
            return V.negate(self._eval(group, env, params, f.body, depth, fast))
        if isinstance(f, F.And):
            return V.all_of(
                (
                    self._eval(group, env, params, part, depth, fast)
                    for part in (f.left, f.right)
                ),
                self.cfg.target_max_order,
            )
        if isinstance(f, F.Or):
            return V.any_of(
                (
                    self._eval(group, env, params, part, depth, fast)
                    for part in (f.left, f.right)
                ),
                self.cfg.target_max_order,
            )
        if isinstance(f, F.Implies):
            if f.left == f.right:
                return V.true()
            return V.implies(
                self._eval(group, env, params, f.left, depth, fast),
                self._eval(group, env, params, f.right, depth, fast),
                self.cfg.target_max_order,
            )
        if isinstance(f, (F.ForAll, F.Exists)):
            return self._eval_quantifier(group, env, params, f, depth, fast)
        if isinstance(f, F.Box):
            return self._eval_box(group, env, params, f, depth, fast)
        if isinstance(f, F.Dia):
            return self._eval_dia(group, env, params, f, depth, fast)
        raise TypeError(f"not a formula: {f!r}")

    def _memo_eval(self, group, env, params, f, depth, fast) -> Verdict:
        key = (group, f, tuple(sorted(env.items())), params, depth, fast)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        out = self._eval(group, env, params, f, depth, fast)
        if not (out.is_unknown and fast):
            self.memo[key] = out
        return out

    def _screen_conjuncts(self, body: F.Formula) -> list[F.Formula]:
        """Modal-free conjuncts of the matrix under the quantifier prefix.
        A false one falsifies the whole body, whichever way the remaining
        prefix variables are chosen."""
        out = []

        def walk(g: F.Formula, rebound: frozenset[str]):
            if isinstance(g, F.And):
                walk(g.left, rebound)
                walk(g.right, rebound)
            elif isinstance(g, (F.ForAll, F.Exists)):
                walk(g.body, rebound | {g.var})
            elif not (F.free_vars(g) & rebound):
                out.append(g)

        walk(body, frozenset())
        return [c for c in out if not _contains_modal(c)]

    def _eval_quantifier(self, group, env, params, f, depth, fast) -> Verdict:
        is_forall = isinstance(f, F.ForAll)
        screen = self._screen_conjuncts(f.body)

        def candidate_verdicts(fast_pass: bool):
            for x in group.elements():
                child_env = dict(env)
                child_env[f.var] = x
                if screen:
                    rejected = False
                    for c in screen:
                        if not F.free_vars(c) <= child_env.keys():
                            continue
                        if self._eval(group, child_env, params, c, depth, True).is_false:
                            rejected = True
                            break
                    if rejected:
                        yield V.false()
                        continue
                yield self._memo_eval(group, child_env, params, f.body, depth, fast_pass)

        combine = V.all_of if is_forall else V.any_of
        quick = combine(candidate_verdicts(True), self.cfg.target_max_order)
        if quick.resolved or fast:
            return quick
        return combine(candidate_verdicts(False), self.cfg.target_max_order)

    def _transport(self, env, params, hom) -> tuple[dict[str, int], tuple[int, ...]]:
        return (
            {name: hom.map[val] for name, val in env.items()},
            tuple(hom.map[p] for p in params),
        )

    def _eval_box(self, group, env, params, f, depth, fast) -> Verdict:
        inner = f.body
        pattern = _match_commutation(f)
        if pattern is not None:
            xs, y = pattern
            x_vals = tuple(_eval_term(t, group, env, params) for t in xs)
            y_val = _eval_term(y, group, env, params)
            if y_val in G.subgroup_closure(group, x_vals):
                return V.true(
                    proof_backed=True,
                    evidence="membership holds in every homomorphic image",
                )
        if all(val == 0 for val in env.values()) and all(p == 0 for p in params):
            if self.valid_under_identity(inner, depth):
                return V.true(
                    proof_backed=True,
                    evidence="assignment is identity-valued and preserved by all maps",
                )
        if self.valid_everywhere(inner, depth):
            return V.true(proof_backed=True, evidence="body holds at every world")
        if depth <= 0 or fast:
            return self._unknown()
        found = self._search_box_counterexample(group, env, params, inner, depth)
        if found is not None:
            return V.false(evidence=found)
        return self._unknown()

    def _search_box_counterexample(self, group, env, params, inner, depth):
        for target in self.targets:
            for hom in G.enumerate_homs(group, target):
                t_env, t_params = self._transport(env, params, hom)
                child = self._memo_eval(target, t_env, t_params, inner, depth - 1, False)
                if child.is_false:
                    return Witness(target, hom, "inner formula fails at this image")
        return None

    def _eval_dia(self, group, env, params, f, depth, fast) -> Verdict:
        inner = f.body
        if self.falsified_everywhere(inner, depth):
            return V.false(evidence="body fails at every world")
        if depth <= 0 or fast:
            return self._unknown()
        for target in self.targets:
            for hom in G.enumerate_homs(group, target):
                t_env, t_params = self._transport(env, params, hom)
                child = self._memo_eval(target, t_env, t_params, inner, depth - 1, False)
                if child.is_true:
                    return V.true(evidence=Witness(target, hom, "inner formula holds here"))
        return self._unknown()


def _max_param_index(f: F.Formula) -> int:
    def from_term(t: F.Term) -> int:
        if isinstance(t, F.Param):
            return t.index
        if isinstance(t, F.Mul):
            return max(from_term(t.left), from_term(t.right))
        if isinstance(t, F.Inv):
            return from_term(t.inner)
        return -1

    if isinstance(f, F.Eq):
        return max(from_term(f.lhs), from_term(f.rhs))
    if isinstance(f, F.Not):
        return _max_param_index(f.body)
    if isinstance(f, (F.And, F.Or, F.Implies)):
        return max(_max_param_index(f.left), _max_param_index(f.right))
    if isinstance(f, (F.ForAll, F.Exists, F.Box, F.Dia)):
        return _max_param_index(f.body)
    raise TypeError(f"not a formula: {f!r}")


def _contains_modal(f: F.Formula) -> bool:
    if isinstance(f, (F.Box, F.Dia)):
        return True
    if isinstance(f, F.Eq):
        return False
    if isinstance(f, F.Not):
        return _contains_modal(f.body)
    if isinstance(f, (F.And, F.Or, F.Implies)):
        return _contains_modal(f.left) or _contains_modal(f.right)
    if isinstance(f, (F.ForAll, F.Exists)):
        return _contains_modal(f.body)
    raise TypeError(f"not a formula: {f!r}")


def evaluate(world: World, f: F.Formula, cfg: BoundConfig | None = None) -> Verdict:
    """Evaluate f at the world under the bounded homomorphism semantics."""
    cfg = cfg or BoundConfig()
    if F.has_inverses(f):
        raise EvalError("formula has formal inverses; run expand_inverses first")
    missing = F.free_vars(f) - set(world.param_names)
    if missing:
        raise EvalError(f"unassigned free variables: {sorted(missing)}")
    env = dict(zip(world.param_names, world.params))
    ev = _Evaluator(cfg)
    return ev._eval(world.group, env, world.params, f, cfg.modal_depth_limit)


def search_box_counterexample(
    world: World, inner: F.Formula, cfg: BoundConfig | None = None
):
    """Look for a target and homomorphism falsifying `inner` (the body of a
    box) at the image world; any hit is re-checked by evaluation."""
    cfg = cfg or BoundConfig()
    ev = _Evaluator(cfg)
    env = dict(zip(world.param_names, world.params))
    found = ev._search_box_counterexample(
        world.group, env, world.params, inner, cfg.modal_depth_limit
    )
    if found is None:
        return None
    t_env, t_params = ev._transport(env, world.params, found.hom)
    recheck = ev._eval(found.target, t_env, t_params, inner, cfg.modal_depth_limit - 1)
    if not recheck.is_false:
        raise V.InvariantError("counterexample failed its re-check")
    return found.target, found.hom, recheck


# ---------------------------------------------------------------------------
# Definability harness


@dataclass(frozen=True)
class DefinabilityEntry:
    group_label: str
    assignment: tuple[int, ...]
    expected: bool
    verdict: Verdict

    @property
    def agrees(self) -> bool:
        if self.verdict.is_unknown:
            return True  # inconclusive, not a disagreement
        return self.verdict.is_true == self.expected

    @property
    def witness_order(self) -> int | None:
        w = self.verdict.evidence
        if isinstance(w, Witness):
            return w.target.order
        return None


@dataclass
class DefinabilityReport:
    theorem_id: str
    entries: list[DefinabilityEntry] = field(default_factory=list)

    @property
    def disagreements(self) -> int:
        return sum(not e.agrees for e in self.entries)

    @property
    def unknowns(self) -> int:
        return sum(e.verdict.is_unknown for e in self.entries)

    @property
    def proof_backed(self) -> int:
        return sum(e.verdict.proof_backed for e in self.entries)

    def records(self) -> list[str]:
        out = [
            f"suite=definability theorem={self.theorem_id} "
            f"instances={len(self.entries)} disagreements={self.disagreements} "
            f"proof_backed={self.proof_backed} unknown={self.unknowns}"
        ]
        for e in self.entries:
            if not e.agrees:
                out.append(
                    f"disagreement group={e.group_label} assignment={e.assignment} "
                    f"expected={e.expected} verdict={e.verdict.status}"
                )
        return out


THEOREM_IDS = ("cyc-member", "tuple-member", "torsion", "cyclic", "n-generated")


def check_definability(
    theorem_id: str, max_group_order: int, cfg: BoundConfig | None = None
) -> DefinabilityReport:
    """Compare modal verdicts against ground truth computed directly on the
    Cayley tables, over every group in the catalog and every assignment."""
    cfg = cfg or BoundConfig(target_max_order=12)
    report = DefinabilityReport(theorem_id)
    worlds = G.catalog(max_group_order)
    if theorem_id == "cyc-member":
        f = F.cyc_member("y", "x")
        for grp in worlds:
            for x in grp.elements():
                cyc = G.subgroup_closure(grp, (x,))
                for y in grp.elements():
                    world = World(grp, (x, y), ("x", "y"))
                    verdict = evaluate(world, f, cfg)
                    report.entries.append(
                        DefinabilityEntry(grp.label, (x, y), y in cyc, verdict)
                    )
    elif theorem_id == "tuple-member":
        f = F.tuple_member("y", "x1", "x2")
        for grp in worlds:
            for x1 in grp.elements():
                for x2 in grp.elements():
                    gen = G.subgroup_closure(grp, (x1, x2))
                    for y in grp.elements():
                        world = World(grp, (x1, x2, y), ("x1", "x2", "y"))
                        verdict = evaluate(world, f, cfg)
                        report.entries.append(
                            DefinabilityEntry(grp.label, (x1, x2, y), y in gen, verdict)
                        )
    elif theorem_id == "torsion":
        f = F.ord_finite("x")
        for grp in worlds:
            for x in grp.elements():
                world = World(grp, (x,), ("x",))
                verdict = evaluate(world, f, cfg)
                report.entries.append(DefinabilityEntry(grp.label, (x,), True, verdict))
    elif theorem_id == "cyclic":
        f = F.cyclic()
        for grp in worlds:
            expected = any(
                len(G.subgroup_closure(grp, (x,))) == grp.order for x in grp.elements()
            )
            verdict = evaluate(World(grp), f, cfg)
            report.entries.append(DefinabilityEntry(grp.label, (), expected, verdict))
    elif theorem_id == "n-generated":
        f = F.n_generated(2)
        for grp in worlds:
            expected = any(
                len(G.subgroup_closure(grp, (x1, x2))) == grp.order
                for x1 in grp.elements()
                for x2 in grp.elements()
            )
            verdict = evaluate(World(grp), f, cfg)
            report.entries.append(DefinabilityEntry(grp.label, (), expected, verdict))
    else:
        raise EvalError(f"unknown theorem id {theorem_id!r}; choose from {THEOREM_IDS}")
    return report
