"""Finite universes: carrier sets for every sort plus identifier pools.

Carrier order is the determinism anchor: declaration order for
enumerations, ascending for integer ranges, pool order for identifiers,
bitmask order for powersets.
"""

from __future__ import annotations

from .documents import TypeDocument
from .errors import SortError
from .values import EXTERNAL, EnumValue, IntValue, ObjectId, SetValue, value_key

_MAX_POWERSET_BASE = 16


class Universe:
    def __init__(self):
        self._carriers: dict = {}
        self._carrier_sets: dict = {}
        self._aliases: dict = {}
        self.literal_sorts: dict = {}
        self.id_pools: dict = {}
        self.int_ranges: dict = {}

    # -- construction -------------------------------------------------------

    def add_enum(self, name: str, literals: tuple) -> None:
        if name in self._aliases:
            raise SortError(f"sort {name!r} declared twice")
        values = tuple(EnumValue(name, lit, i) for i, lit in enumerate(literals))
        for lit in literals:
            if lit in self.literal_sorts and self.literal_sorts[lit] != name:
                raise SortError(
                    f"literal {lit!r} appears in sorts "
                    f"{self.literal_sorts[lit]!r} and {name!r}")
            self.literal_sorts[lit] = name
        self._carriers[name] = values
        self._aliases[name] = name

    def add_range(self, name: str, lo: int, hi: int) -> None:
        if name in self._aliases:
            raise SortError(f"sort {name!r} declared twice")
        if lo > hi:
            raise SortError(f"empty integer range for sort {name!r}")
        self._carriers[name] = tuple(IntValue(name, n) for n in range(lo, hi + 1))
        self._aliases[name] = name
        self.int_ranges[name] = (lo, hi)

    def add_alias(self, name: str, target) -> None:
        if name in self._aliases:
            raise SortError(f"sort {name!r} declared twice")
        self._aliases[name] = target

    def add_class(self, cls: str, pool_size: int) -> None:
        if pool_size < 1:
            raise SortError(f"zero identifier bound for class {cls!r}")
        if cls in self._aliases:
            raise SortError(f"class {cls!r} collides with a declared sort")
        pool = tuple(ObjectId(cls, i) for i in range(pool_size))
        self.id_pools[cls] = pool
        self._carriers[cls] = pool
        self._aliases[cls] = cls

    def finish(self) -> None:
        """Resolve aliases and build the universal endpoint carrier."""
        for name in list(self._aliases):
            self.canon(name)
        ids = [oid for pool in sorted(self.id_pools.items())
               for oid in pool[1]]
        self._carriers["@object"] = (EXTERNAL, *ids)
        self._aliases["@object"] = "@object"

    def register_input_carrier(self, cls: str, messages: tuple) -> None:
        self._carriers[("@in", cls)] = messages

    # -- lookup -------------------------------------------------------------

    def canon(self, key):
        """Canonical sort key: aliases resolved, Set applied recursively."""
        if isinstance(key, str):
            if key not in self._aliases:
                raise SortError(f"unknown sort {key!r}")
            target = self._aliases[key]
            if target == key:
                return key
            resolved = self.canon(target)
            self._aliases[key] = resolved
            return resolved
        if isinstance(key, tuple) and key[0] == "set":
            return ("set", self.canon(key[1]))
        if isinstance(key, tuple) and key[0] == "@in":
            return key
        raise SortError(f"unknown sort {key!r}")

    def has_sort(self, key) -> bool:
        try:
            self.canon(key)
            return True
        except SortError:
            return False

    def carrier(self, key) -> tuple:
        key = self.canon(key)
        if key in self._carriers:
            return self._carriers[key]
        if isinstance(key, tuple) and key[0] == "set":
            base = self.carrier(key[1])
            if len(base) > _MAX_POWERSET_BASE:
                raise SortError(
                    f"powerset base {key[1]!r} too large ({len(base)} values)")
            subsets = []
            for mask in range(1 << len(base)):
                elems = frozenset(
                    base[j] for j in range(len(base)) if mask >> j & 1)
                subsets.append(SetValue(elems))
            values = tuple(subsets)
            self._carriers[key] = values
            return values
        raise SortError(f"no carrier for sort {key!r}")

    def carrier_set(self, key) -> frozenset:
        key = self.canon(key)
        cached = self._carrier_sets.get(key)
        if cached is None:
            cached = frozenset(self.carrier(key))
            self._carrier_sets[key] = cached
        return cached

    def literal(self, name: str):
        sort = self.literal_sorts.get(name)
        if sort is None:
            return None
        carrier = self._carriers[sort]
        for v in carrier:
            if v.name == name:
                return v
        return None

    def object_id(self, cls: str, index: int) -> ObjectId:
        pool = self.id_pools.get(cls)
        if pool is None:
            raise SortError(f"unknown class {cls!r}")
        if not 0 <= index < len(pool):
            raise SortError(f"{cls}#{index} outside the identifier pool")
        return pool[index]

    def class_names(self) -> tuple:
        return tuple(sorted(self.id_pools))


def build_universe(type_docs, bounds: dict) -> Universe:
    """Build carriers from type documents plus per-class pool sizes.

    ``type_docs`` is one TypeDocument or an iterable of them; ``bounds``
    maps class names to identifier pool sizes (all >= 1).
    """
    if isinstance(type_docs, TypeDocument):
        type_docs = [type_docs]
    u = Universe()
    for cls in sorted(bounds):
        u.add_class(cls, bounds[cls])
    deferred = []
    for doc in type_docs:
        for sd in doc.sorts:
            if sd.literals is not None:
                u.add_enum(sd.name, sd.literals)
            elif sd.int_range is not None:
                u.add_range(sd.name, *sd.int_range)
            else:
                deferred.append(sd)
    for sd in deferred:
        u.add_alias(sd.name, sd.set_of)
    u.finish()
    return u
