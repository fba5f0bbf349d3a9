"""Layer registry for multiplex nomination networks.

Layers are identified by short stable names. The canonical registry covers
the eleven name generators used throughout the library's survey-style
instruments; callers may supply their own registry to work with arbitrary
layer sets.
"""

from __future__ import annotations

from .errors import UnknownLayerError

# Canonical instrument: kin ties, social ties, economic support, and
# health-advice ties (both directions asked separately).
CANONICAL_LAYER_NAMES: tuple[str, ...] = (
    "parent",
    "sibling",
    "partner",
    "patron",
    "personal_private",
    "free_time",
    "closest_friend",
    "borrow_money",
    "lend_money",
    "health_advice_give",
    "health_advice_get",
)

KIN_LAYER_NAMES: tuple[str, ...] = ("parent", "sibling", "partner")


class LayerRegistry:
    """Immutable ordered set of layer names with name<->id lookup.

    Ids are dense ints in registration order and are used as array indices
    throughout, so ordering is part of the contract.
    """

    __slots__ = ("_names", "_ids")

    def __init__(self, names=CANONICAL_LAYER_NAMES):
        names = tuple(names)
        seen = set()
        for name in names:
            if not name or not isinstance(name, str):
                raise UnknownLayerError(f"bad layer name: {name!r}")
            if name in seen:
                raise UnknownLayerError(f"duplicate layer name: {name!r}")
            seen.add(name)
        self._names = names
        self._ids = {name: i for i, name in enumerate(names)}

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self):
        return iter(self._names)

    def __contains__(self, name) -> bool:
        return name in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, LayerRegistry) and other._names == self._names

    def __hash__(self) -> int:
        return hash(self._names)

    def __repr__(self) -> str:
        return f"LayerRegistry({list(self._names)!r})"

    def id_of(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise UnknownLayerError(
                f"unknown layer {name!r}; registered: {', '.join(self._names)}"
            ) from None

    def name_of(self, layer_id: int) -> str:
        if not 0 <= layer_id < len(self._names):
            raise UnknownLayerError(f"layer id {layer_id} out of range")
        return self._names[layer_id]


CANONICAL_REGISTRY = LayerRegistry(CANONICAL_LAYER_NAMES)
