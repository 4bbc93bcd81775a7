"""Semi-naive bottom-up evaluation of stratified programs."""

from __future__ import annotations

from collections import defaultdict

from .parser import parse_atom
from .program import Program
from .store import FactStore
from .stratify import StratifiedProgram, stratify
from .terms import (
    Atom,
    BinOp,
    EvaluationError,
    SchemaError,
    check_int_range,
    compare,
    is_var,
)


class _Relation:
    __slots__ = ("tuples", "indexes")

    def __init__(self, tuples=()):
        self.tuples = set(tuples)
        self.indexes = {}

    def add(self, tup) -> bool:
        if tup in self.tuples:
            return False
        self.tuples.add(tup)
        for positions, index in self.indexes.items():
            index.setdefault(tuple(tup[p] for p in positions), []).append(tup)
        return True

    def lookup(self, positions, key):
        if not positions:
            return self.tuples
        index = self.indexes.get(positions)
        if index is None:
            index = {}
            for tup in self.tuples:
                index.setdefault(tuple(tup[p] for p in positions), []).append(tup)
            self.indexes[positions] = index
        return index.get(key, ())


_EMPTY = _Relation()


def _compile_expr(expr, slots):
    if is_var(expr):
        slot = slots[expr]
        return lambda env: env[slot]
    if isinstance(expr, BinOp):
        left = _compile_expr(expr.left, slots)
        right = _compile_expr(expr.right, slots)
        if expr.op == "+":
            return lambda env: check_int_range(left(env) + right(env))
        if expr.op == "-":
            return lambda env: check_int_range(left(env) - right(env))
        return lambda env: check_int_range(left(env) * right(env))
    return lambda env: expr


def _key_fn(parts):
    """Build a function computing the lookup key from the environment."""
    if not parts:
        return lambda env: ()
    if len(parts) == 1:
        is_slot, value = parts[0]
        if is_slot:
            return lambda env: (env[value],)
        const = (value,)
        return lambda env: const
    return lambda env: tuple(env[v] if s else v for s, v in parts)


def _join_order(positives, first=None):
    """Greedy order: next literal is the one with the most bound or constant columns."""
    remaining = list(range(len(positives)))
    order = []
    bound = set()

    def take(i):
        remaining.remove(i)
        order.append(i)
        bound.update(a for a in positives[i].atom.args if is_var(a) and not a.anonymous)

    if first is not None:
        take(first)
    while remaining:

        def score(i):
            args = positives[i].atom.args
            fixed = sum(1 for a in args if not is_var(a) or a in bound)
            return (fixed > 0, fixed, -i)

        take(max(remaining, key=score))
    return order


class _Plan:
    """A rule compiled into nested closures, optionally reading one literal from the delta."""

    def __init__(self, rule, ctx, delta_index=None):
        self.rule = rule
        self.delta_relation = None
        positives = rule.positive
        if delta_index is not None:
            self.delta_relation = positives[delta_index].atom.relation
        order = _join_order(positives, delta_index)
        slots = {}
        pending = list(rule.negative) + list(rule.constraints)
        steps = []

        def flush():
            for item in list(pending):
                needed = item.variables() if not hasattr(item, "atom") else {
                    v for v in item.atom.variables() if not v.anonymous
                }
                if needed <= set(slots):
                    steps.append(item)
                    pending.remove(item)

        flush()
        for i in order:
            steps.append((positives[i], i == delta_index))
            for arg in positives[i].atom.args:
                if is_var(arg) and not arg.anonymous and arg not in slots:
                    slots[arg] = len(slots)
            flush()
        assert not pending, "safety check should have caught unbound variables"
        self.nslots = len(slots)

        out = []
        self.out = out
        head_parts = [(is_var(a), slots[a] if is_var(a) else a) for a in rule.head.args]
        head_key = _key_fn(head_parts)

        def emit(env):
            out.append(head_key(env))

        nxt = emit
        # Build closures back to front; slot binding order must follow the forward order.
        bound_before = []
        seen = set()
        for step in steps:
            bound_before.append(set(seen))
            if isinstance(step, tuple):
                for arg in step[0].atom.args:
                    if is_var(arg) and not arg.anonymous:
                        seen.add(arg)
        for step, bound in reversed(list(zip(steps, bound_before))):
            if isinstance(step, tuple):
                nxt = self._scan(step[0].atom, step[1], bound, slots, ctx, nxt)
            elif hasattr(step, "atom"):
                nxt = self._negation(step.atom, slots, ctx, nxt)
            else:
                nxt = self._constraint(step, slots, nxt)
        self.entry = nxt

    @staticmethod
    def _scan(atom, from_delta, bound, slots, ctx, nxt):
        positions, parts, binds, eqs = [], [], [], []
        first_pos = {}
        for p, arg in enumerate(atom.args):
            if is_var(arg):
                if arg.anonymous:
                    continue
                if arg in bound:
                    positions.append(p)
                    parts.append((True, slots[arg]))
                elif arg in first_pos:
                    eqs.append((p, first_pos[arg]))
                else:
                    first_pos[arg] = p
                    binds.append((p, slots[arg]))
            else:
                positions.append(p)
                parts.append((False, arg))
        positions = tuple(positions)
        key = _key_fn(parts)
        name = atom.relation
        source = "delta" if from_delta else "full"
        binds = tuple(binds)
        eqs = tuple(eqs)

        if not binds:
            # binds nothing new: an existence test, fire at most once

            def exists(env):
                rel = ctx[source].get(name, _EMPTY)
                if rel.lookup(positions, key(env)):
                    nxt(env)

            return exists

        def scan(env):
            rel = ctx[source].get(name, _EMPTY)
            for tup in rel.lookup(positions, key(env)):
                if eqs and any(tup[a] != tup[b] for a, b in eqs):
                    continue
                for p, s in binds:
                    env[s] = tup[p]
                nxt(env)

        return scan

    @staticmethod
    def _negation(atom, slots, ctx, nxt):
        positions, parts = [], []
        for p, arg in enumerate(atom.args):
            if is_var(arg):
                if arg.anonymous:
                    continue
                positions.append(p)
                parts.append((True, slots[arg]))
            else:
                positions.append(p)
                parts.append((False, arg))
        positions = tuple(positions)
        key = _key_fn(parts)
        name = atom.relation

        def negation(env):
            rel = ctx["full"].get(name, _EMPTY)
            if not rel.lookup(positions, key(env)):
                nxt(env)

        return negation

    @staticmethod
    def _constraint(con, slots, nxt):
        left = _compile_expr(con.left, slots)
        right = _compile_expr(con.right, slots)
        op = con.op

        def constraint(env):
            if compare(op, left(env), right(env)):
                nxt(env)

        return constraint

    def run(self):
        self.out.clear()
        self.entry([None] * self.nslots)
        return self.out


def _coerce(program) -> StratifiedProgram:
    if isinstance(program, StratifiedProgram):
        return program
    if isinstance(program, Program):
        return stratify(program)
    raise TypeError("expected a Program or StratifiedProgram")


def _check_inputs(program: Program, inputs: FactStore):
    for name in inputs.relations():
        if name not in program.declarations:
            raise SchemaError(f"input relation '{name}' is not declared")
        declared = program.types(name)
        if tuple(inputs.schema[name]) != declared:
            raise SchemaError(
                f"input relation '{name}' has columns {tuple(inputs.schema[name])}, "
                f"declared {declared}"
            )
        if inputs[name] and not program.accepts_input(name):
            raise SchemaError(f"relation '{name}' is derived by rules and not marked .input")


def evaluate(program, inputs: FactStore | None = None) -> FactStore:
    """Compute the stratified least model of ``program`` over ``inputs``.

    Returns every declared relation: inputs, inline facts and derived tuples.
    """
    strat = _coerce(program)
    prog = strat.program
    inputs = inputs if inputs is not None else FactStore.empty()
    _check_inputs(prog, inputs)

    full = {name: _Relation() for name in prog.declarations}
    for name in inputs.relations():
        full[name].tuples.update(inputs[name])
    for name, tuples in prog.facts.items():
        full[name].tuples.update(tuples)
    ctx = {"full": full, "delta": {}}

    try:
        for index, members in enumerate(strat.strata):
            rules = strat.rules_for(index)
            if not rules:
                continue
            _run_stratum(rules, members, full, ctx)
    except RecursionError as exc:  # pragma: no cover - pathological rule bodies
        raise EvaluationError("rule body too deep to evaluate") from exc

    return FactStore(
        {name: rel.tuples for name, rel in full.items()}, prog.schema, validate=False
    )


def _run_stratum(rules, members, full, ctx):
    ctx["delta"] = {}
    initial = [_Plan(rule, ctx) for rule in rules]
    delta_plans = []
    for rule in rules:
        for i, lit in enumerate(rule.positive):
            if lit.atom.relation in members:
                delta_plans.append(_Plan(rule, ctx, delta_index=i))

    derived = defaultdict(set)
    for plan in initial:
        derived[plan.rule.head.relation].update(plan.run())
    delta = _absorb(derived, full)
    while delta:
        ctx["delta"] = delta
        derived = defaultdict(set)
        for plan in delta_plans:
            if plan.delta_relation not in delta:
                continue
            derived[plan.rule.head.relation].update(plan.run())
        delta = _absorb(derived, full)
    ctx["delta"] = {}


def _absorb(derived, full):
    delta = {}
    for name, tuples in derived.items():
        rel = full[name]
        fresh = [t for t in tuples if t not in rel.tuples]
        if fresh:
            for t in fresh:
                rel.add(t)
            delta[name] = _Relation(fresh)
    return delta


def query(store: FactStore, pattern) -> list:
    """All bindings of the pattern's variables, in lexicographic tuple order.

    ``pattern`` is an :class:`Atom` or its text form, e.g. ``"path(1, Y)"``.
    """
    atom = parse_atom(pattern) if isinstance(pattern, str) else pattern
    if not isinstance(atom, Atom):
        raise TypeError("pattern must be an Atom or atom text")
    if atom.relation not in store:
        raise SchemaError(f"unknown relation '{atom.relation}'")
    types = store.schema[atom.relation]
    if len(types) != atom.arity:
        raise SchemaError(
            f"arity mismatch for '{atom.relation}': relation has {len(types)} columns, "
            f"pattern has {atom.arity}"
        )
    results = []
    for tup in store.sorted_tuples(atom.relation):
        binding = {}
        for arg, value in zip(atom.args, tup):
            if is_var(arg):
                if arg.anonymous:
                    continue
                if arg.name in binding and binding[arg.name] != value:
                    break
                binding[arg.name] = value
            elif arg != value:
                break
        else:
            results.append(binding)
    return results
