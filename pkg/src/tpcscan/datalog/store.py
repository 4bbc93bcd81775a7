"""Fact stores and the tab-separated ``.facts`` file format."""

from __future__ import annotations

from pathlib import Path
from types import MappingProxyType

from .program import check_fact_tuple
from .terms import NUMBER, SchemaError


class FactStore:
    """Immutable mapping from relation name to a set of ground tuples.

    Every relation carries its column types so stores can be merged and
    serialized without a program at hand.
    """

    __slots__ = ("_rels", "_schema")

    def __init__(self, relations=None, schema=None, validate=True):
        schema = dict(schema or {})
        rels = {}
        for name, tuples in (relations or {}).items():
            if name not in schema:
                raise SchemaError(f"no column types given for relation '{name}'")
            types = tuple(schema[name])
            if validate:
                frozen = set()
                for tup in tuples:
                    tup = tuple(tup)
                    check_fact_tuple(name, tup, types)
                    frozen.add(tup)
                rels[name] = frozenset(frozen)
            else:
                rels[name] = frozenset(tuples)
        for name in schema:
            rels.setdefault(name, frozenset())
        self._rels = MappingProxyType(rels)
        self._schema = MappingProxyType({k: tuple(v) for k, v in schema.items()})

    @classmethod
    def empty(cls, schema=None):
        return cls({}, schema)

    @property
    def schema(self):
        return self._schema

    def relations(self):
        return sorted(self._rels)

    def __contains__(self, relation):
        return relation in self._rels

    def __getitem__(self, relation) -> frozenset:
        return self._rels[relation]

    def get(self, relation, default=frozenset()):
        return self._rels.get(relation, default)

    def sorted_tuples(self, relation):
        return sorted(self._rels[relation])

    def total(self) -> int:
        return sum(len(t) for t in self._rels.values())

    def as_dict(self):
        return {k: set(v) for k, v in self._rels.items()}

    def __eq__(self, other):
        if not isinstance(other, FactStore):
            return NotImplemented
        return dict(self._rels) == dict(other._rels) and dict(self._schema) == dict(
            other._schema
        )

    def __hash__(self):
        return hash(tuple(sorted((k, v) for k, v in self._rels.items())))

    def __repr__(self):
        sizes = ", ".join(f"{k}={len(v)}" for k, v in sorted(self._rels.items()))
        return f"FactStore({sizes})"

    def restrict(self, names):
        names = set(names)
        return FactStore(
            {k: v for k, v in self._rels.items() if k in names},
            {k: v for k, v in self._schema.items() if k in names},
            validate=False,
        )


def merge_stores(a: FactStore, b: FactStore) -> FactStore:
    """Set union per relation; shared relations must agree on column types."""
    schema = dict(a.schema)
    for name, types in b.schema.items():
        if name in schema and schema[name] != types:
            raise SchemaError(
                f"relation '{name}' has columns {schema[name]} in one store and {types} in the other"
            )
        schema[name] = types
    rels = {name: a.get(name) | b.get(name) for name in schema}
    return FactStore(rels, schema, validate=False)


def _format_value(value, relation):
    if isinstance(value, int):
        return str(value)
    if "\t" in value or "\n" in value or "\r" in value:
        raise SchemaError(f"symbol {value!r} in '{relation}' cannot be written to a .facts file")
    return value


def format_facts(store: FactStore, relation: str) -> str:
    lines = ["\t".join(_format_value(v, relation) for v in tup) for tup in store.sorted_tuples(relation)]
    return "".join(line + "\n" for line in lines)


def write_facts(store: FactStore, directory, relations=None):
    """Write one ``<relation>.facts`` file per relation, tuples sorted."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name in relations if relations is not None else store.relations():
        path = directory / f"{name}.facts"
        path.write_bytes(format_facts(store, name).encode("utf-8"))
        written.append(path)
    return written


def read_facts(directory, schema, missing_ok=True) -> FactStore:
    """Load ``<relation>.facts`` files for every relation in ``schema``."""
    directory = Path(directory)
    rels = {}
    for name, types in schema.items():
        path = directory / f"{name}.facts"
        if not path.exists():
            if missing_ok:
                continue
            raise FileNotFoundError(path)
        tuples = set()
        text = path.read_text(encoding="utf-8")
        if not types:
            rels[name] = {()} if text else set()
            continue
        for lineno, line in enumerate(text.split("\n"), 1):
            if line == "" and lineno == text.count("\n") + 1:
                continue
            fields = line.split("\t")
            if len(fields) != len(types):
                raise SchemaError(
                    f"expected {len(types)} columns, found {len(fields)}", line=lineno, source=path
                )
            row = []
            for value, typ in zip(fields, types):
                if typ == NUMBER:
                    try:
                        row.append(int(value))
                    except ValueError:
                        raise SchemaError(
                            f"'{value}' is not a number", line=lineno, source=path
                        ) from None
                else:
                    row.append(value)
            tuples.add(tuple(row))
        rels[name] = tuples
    return FactStore(rels, schema)
