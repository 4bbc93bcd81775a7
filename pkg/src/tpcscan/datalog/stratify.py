"""Stratification of programs with negation."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass

from .program import Program
from .terms import StratificationError


@dataclass(frozen=True)
class StratifiedProgram:
    program: Program
    strata: tuple  # tuple of frozensets of relation names, evaluation order
    stratum_of: dict

    def rules_for(self, index: int):
        members = self.strata[index]
        return [r for r in self.program.rules if r.head.relation in members]


def dependency_edges(program: Program):
    """Yield ``(head, body_relation, negated)`` for every body literal."""
    for rule in program.rules:
        for lit in rule.positive:
            yield rule.head.relation, lit.atom.relation, False
        for lit in rule.negative:
            yield rule.head.relation, lit.atom.relation, True


def _sccs(nodes, succ):
    """Tarjan's algorithm, iterative. Returns components in reverse topological order."""
    index, low, on_stack, stack, out = {}, {}, set(), [], []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(sorted(succ[root])))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(sorted(succ[nxt]))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.add(member)
                    if member == node:
                        break
                out.append(frozenset(comp))
    return out


def _find_path(comp, succ, start, end):
    """Shortest dependency path from ``start`` to ``end`` inside ``comp``."""
    if start == end:
        return [start]
    prev = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in sorted(succ[node]):
            if nxt in comp and nxt not in prev:
                prev[nxt] = node
                if nxt == end:
                    path = [nxt]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return list(reversed(path))
                queue.append(nxt)
    return [start, end]


def stratify(program: Program) -> StratifiedProgram:
    """Partition relations into strata; negative edges must point strictly down.

    A relation's stratum is the longest chain of negative dependencies below
    it, so purely positive programs form a single stratum.
    """
    nodes = sorted(program.declarations)
    # dependency direction: head depends on body; edge body -> head for evaluation order
    depends = defaultdict(set)
    negative = set()
    for head, body, neg in dependency_edges(program):
        depends[head].add(body)
        if neg:
            negative.add((head, body))
    for node in nodes:
        depends.setdefault(node, set())

    comps = _sccs(nodes, depends)  # dependencies come out before dependents
    comp_of = {n: i for i, comp in enumerate(comps) for n in comp}
    for comp in comps:
        for head, body in sorted(negative):
            if head in comp and body in comp:
                # body -> ... -> head closes the cycle through the negative edge head -> body
                path = _find_path(comp, depends, body, head)
                cycle = [head] + path
                raise StratificationError(
                    "program is not stratifiable: negation inside cycle "
                    + " -> ".join(cycle),
                    cycle=cycle,
                )

    level = {}
    for i, comp in enumerate(comps):
        lvl = 0
        for node in comp:
            for dep in depends[node]:
                if comp_of[dep] == i:
                    continue
                lvl = max(lvl, level[dep] + (1 if (node, dep) in negative else 0))
        for node in comp:
            level[node] = lvl
    count = max(level.values(), default=-1) + 1
    strata = tuple(frozenset(n for n in nodes if level[n] == k) for k in range(count))
    return StratifiedProgram(program=program, strata=strata, stratum_of=dict(level))
