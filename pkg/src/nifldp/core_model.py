"""State datatypes of the FL protocol model and the neighboring-dataset relations.

Everything here is an immutable value. Infrastructure states are hashable so
they can key the reachable-state tables built by :mod:`nifldp.kripke`.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Union

ActorId = str
LocationId = str
ModelParam = tuple[Fraction, ...]


def as_fraction(x: Any) -> Fraction:
    """Converts ints, decimal strings, ``"n/d"`` strings and Fractions exactly.

    Floats go through ``repr`` so that ``0.1`` becomes ``1/10`` rather than
    the binary expansion.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def model_param(*coords: Any) -> ModelParam:
    return tuple(as_fraction(c) for c in coords)


class FrozenMap(Mapping):
    """Hashable read-only mapping."""

    __slots__ = ("_data", "_hash")

    def __init__(self, data: Union[Mapping, Iterable[tuple[Any, Any]]] = ()):
        self._data = dict(data)
        self._hash = None

    def __getitem__(self, key):
        return self._data[key]

    def __iter__(self) -> Iterator:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._data.items()))
        return self._hash

    def __eq__(self, other) -> bool:
        if isinstance(other, FrozenMap):
            return self._data == other._data
        if isinstance(other, Mapping):
            return self._data == dict(other)
        return NotImplemented

    def __reduce__(self):
        # the cached hash is process-specific (string hashing is salted)
        return (FrozenMap, (self._data,))

    def set(self, key, value) -> "FrozenMap":
        data = dict(self._data)
        data[key] = value
        return FrozenMap(data)

    def __repr__(self) -> str:
        return f"FrozenMap({self._data!r})"


@dataclass(frozen=True)
class DataPoint:
    """One training example.

    Identity is ``id``; equality (and hashing) uses ``(id, features, value)``.
    The ``secret`` flag is metadata and takes no part in set operations.
    """

    id: str
    features: tuple[Fraction, ...] = ()
    value: Fraction = Fraction(0)
    secret: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(as_fraction(f) for f in self.features))
        object.__setattr__(self, "value", as_fraction(self.value))


@dataclass(frozen=True)
class Dataset:
    points: frozenset[DataPoint] = frozenset()

    def __post_init__(self):
        pts = frozenset(self.points)
        object.__setattr__(self, "points", pts)
        ids = [p.id for p in pts]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate point ids in dataset: {dupes}")

    @classmethod
    def of(cls, *points: DataPoint) -> "Dataset":
        return cls(frozenset(points))

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[DataPoint]:
        return iter(sorted(self.points, key=lambda p: p.id))

    def __bool__(self) -> bool:
        return bool(self.points)

    @property
    def ids(self) -> frozenset[str]:
        return frozenset(p.id for p in self.points)

    def by_id(self) -> dict[str, DataPoint]:
        return {p.id: p for p in self.points}

    def union(self, other: "Dataset") -> "Dataset":
        return Dataset(self.points | other.points)

    def without(self, point_id: str) -> "Dataset":
        return Dataset(frozenset(p for p in self.points if p.id != point_id))

    def with_point(self, point: DataPoint) -> "Dataset":
        return Dataset(frozenset(p for p in self.points if p.id != point.id) | {point})

    def feature_dim(self) -> int | None:
        dims = {len(p.features) for p in self.points}
        if len(dims) > 1:
            raise ValueError(f"inconsistent feature lengths: {sorted(dims)}")
        return dims.pop() if dims else None


def _differing_ids(a: Dataset, b: Dataset) -> set[str]:
    # An id differs if it is present on one side only, or present on both
    # with different content.
    pa, pb = a.by_id(), b.by_id()
    out = set(pa.keys() ^ pb.keys())
    out.update(i for i in pa.keys() & pb.keys() if pa[i] != pb[i])
    return out


def neighbors_one(a: Dataset, b: Dataset) -> bool:
    """True iff the datasets differ in exactly one data point.

    A point present in one dataset only counts as one difference, and so does
    a point whose id is in both but whose features or value changed.
    """
    return len(_differing_ids(a, b)) == 1


def neighbors_x(a: Dataset, b: Dataset, x: DataPoint) -> bool:
    return (a.points ^ b.points) == {x}


# Events. Trace keeps them newest-first.


@dataclass(frozen=True)
class Put:
    partition: FrozenMap


@dataclass(frozen=True)
class Get:
    client: ActorId
    grad: ModelParam


@dataclass(frozen=True)
class Eval:
    newmodel: ModelParam


Event = Union[Put, Get, Eval]


@dataclass(frozen=True)
class Trace:
    events: tuple[Event, ...] = ()

    def __len__(self) -> int:
        return len(self.events)

    def prepend(self, event: Event) -> "Trace":
        return Trace((event,) + self.events)

    def chronological(self) -> tuple[Event, ...]:
        return tuple(reversed(self.events))

    def count(self, kind: type) -> int:
        return sum(isinstance(e, kind) for e in self.events)

    def is_well_formed(self, clients: Iterable[ActorId], *, complete_rounds: bool = False) -> bool:
        """Checks the chronological shape ``Put (Get^|clients| Eval)*``.

        Within a round the Get clients must be pairwise distinct members of
        ``clients``. A trailing partial round is accepted unless
        ``complete_rounds`` is set.
        """
        clients = frozenset(clients)
        evs = self.chronological()
        if not evs:
            return not complete_rounds
        if not isinstance(evs[0], Put):
            return False
        seen: set[ActorId] = set()
        for ev in evs[1:]:
            if isinstance(ev, Get):
                if ev.client not in clients or ev.client in seen:
                    return False
                seen.add(ev.client)
            elif isinstance(ev, Eval):
                if seen != clients:
                    return False
                seen = set()
            else:
                return False
        return not (complete_rounds and seen)


@dataclass(frozen=True)
class IGraph:
    locations: frozenset[LocationId]
    aloc: FrozenMap
    server: ActorId
    clients: frozenset[ActorId]
    ready: frozenset[ActorId]
    gradient: FrozenMap
    curmodpar: ModelParam
    partition: FrozenMap
    dataset: Dataset

    def __post_init__(self):
        for name in ("locations", "clients", "ready"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        for name in ("aloc", "gradient", "partition"):
            val = getattr(self, name)
            if not isinstance(val, FrozenMap):
                object.__setattr__(self, name, FrozenMap(val))
        object.__setattr__(self, "curmodpar", tuple(as_fraction(c) for c in self.curmodpar))

    def replace(self, **changes) -> "IGraph":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return IGraph(**fields)

    @property
    def dim(self) -> int:
        return len(self.curmodpar)


def validate_igraph(g: IGraph, *, after_put: bool | None = None) -> list[str]:
    """Lists every violated IGraph invariant; empty when the graph is well formed.

    The partition cover check (union equals dataset) applies only after a Put
    event. When ``after_put`` is None it is inferred from whether any client
    holds data.
    """
    problems: list[str] = []
    if g.server in g.clients:
        problems.append("server in clients")
    if not g.ready <= g.clients:
        problems.append("ready not subset of clients")
    if set(g.gradient) != set(g.clients):
        problems.append("gradient domain differs from clients")
    if set(g.partition) != set(g.clients):
        problems.append("partition domain differs from clients")
    if any(loc not in g.locations for loc in g.aloc.values()):
        problems.append("actor located outside locations")
    if len(g.curmodpar) < 1:
        problems.append("model parameter has dimension 0")
    if any(len(v) != len(g.curmodpar) for v in g.gradient.values()):
        problems.append("gradient dimension mismatch")

    parts = [g.partition[c] for c in sorted(g.partition)]
    seen: set[str] = set()
    disjoint = True
    for p in parts:
        if seen & p.ids:
            disjoint = False
        seen |= p.ids
    if not disjoint:
        problems.append("partitions not disjoint")
    if after_put is None:
        after_put = any(len(p) for p in parts)
    if after_put:
        union = frozenset().union(*(p.points for p in parts)) if parts else frozenset()
        if union != g.dataset.points:
            problems.append("partition union differs from dataset")
    return problems


POLICY_STUB = "poli"  # opaque, never consulted


@dataclass(frozen=True)
class Infrastructure:
    igra: IGraph
    prot: frozenset[Trace] = frozenset({Trace()})
    poli: str = POLICY_STUB

    def __post_init__(self):
        prot = frozenset(self.prot)
        if not prot:
            raise ValueError("protocol must contain at least one trace")
        object.__setattr__(self, "prot", prot)

    def __hash__(self) -> int:
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.igra, self.prot))
            object.__setattr__(self, "_hash", h)
        return h

    def __reduce__(self):
        return (Infrastructure, (self.igra, self.prot, self.poli))

    @property
    def trace(self) -> Trace:
        """The current run: the longest trace in ``prot``."""
        return max(self.prot, key=len)

    def extend(self, igra: IGraph, event: Event) -> "Infrastructure":
        return Infrastructure(igra, self.prot | {self.trace.prepend(event)}, self.poli)

    @property
    def has_put(self) -> bool:
        return any(isinstance(e, Put) for e in self.trace.events)

    @property
    def rounds_done(self) -> int:
        return self.trace.count(Eval)


def initial_infrastructure(
    partitions: Mapping[ActorId, Dataset],
    initial_model: Iterable[Any],
    *,
    server: ActorId = "server",
    locations: Mapping[ActorId, LocationId] | None = None,
) -> Infrastructure:
    """Builds the initial state with the partition staged for deployment.

    The global dataset is the union of ``partitions``; every client gradient
    starts at the zero vector. With no ``locations`` each actor gets its own
    location named after it.
    """
    w0 = tuple(as_fraction(c) for c in initial_model)
    clients = frozenset(partitions)
    if locations is None:
        locations = {a: f"loc_{a}" for a in clients | {server}}
    dataset = Dataset(frozenset().union(*(p.points for p in partitions.values())))
    igra = IGraph(
        locations=frozenset(locations.values()),
        aloc=FrozenMap(locations),
        server=server,
        clients=clients,
        ready=frozenset(),
        gradient=FrozenMap({c: tuple(Fraction(0) for _ in w0) for c in clients}),
        curmodpar=w0,
        partition=FrozenMap(partitions),
        dataset=dataset,
    )
    return Infrastructure(igra)
