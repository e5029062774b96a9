"""Registry of active relation encoders plus the append-only accepted library.

Builtins are pre-installed as the active definition for every relation, so a
grounding run can always resolve the full closed set. Optimization runs call
:meth:`EncoderRegistry.accept` to promote a winning candidate; readers take a
snapshot, so a run observes one consistent set of encoders.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from .builtins import builtin_definitions
from .dsl import EncoderDefinition, definition_from_dict, validate_definition
from .expression import ALL_RELATIONS

__all__ = ["EncoderRegistry", "load_registry", "save_registry"]


class EncoderRegistry:
    """Single-writer, many-reader store of encoder definitions."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._active: dict[str, EncoderDefinition] = builtin_definitions()
        self._library: list[EncoderDefinition] = []

    def active_definition(self, relation: str) -> EncoderDefinition:
        with self._lock:
            try:
                return self._active[relation]
            except KeyError:
                raise KeyError(f"no active encoder for relation {relation!r}") from None

    def snapshot(self) -> dict[str, EncoderDefinition]:
        """Consistent copy of the active map; definitions are immutable."""
        with self._lock:
            return dict(self._active)

    @property
    def library(self) -> tuple[EncoderDefinition, ...]:
        with self._lock:
            return tuple(self._library)

    def accepted_definition(self, relation: str) -> EncoderDefinition | None:
        """Most recently accepted definition for a relation, if any."""
        with self._lock:
            for defn in reversed(self._library):
                if defn.relation == relation:
                    return defn
        return None

    def accept(self, defn: EncoderDefinition) -> None:
        """Append to the library and make the definition active."""
        validate_definition(defn)
        with self._lock:
            self._library.append(defn)
            self._active[defn.relation] = defn

    def install(self, defn: EncoderDefinition) -> None:
        """Replace the active definition without recording an acceptance."""
        validate_definition(defn)
        with self._lock:
            self._active[defn.relation] = defn

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "active": {name: self._active[name].to_dict() for name in ALL_RELATIONS},
                "library": [d.to_dict() for d in self._library],
            }


def save_registry(registry: EncoderRegistry, path: str | Path) -> None:
    Path(path).write_text(json.dumps(registry.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_registry(path: str | Path) -> EncoderRegistry:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    registry = EncoderRegistry()
    for defn_raw in raw.get("library", []):
        defn = definition_from_dict(defn_raw)
        validate_definition(defn)
        registry._library.append(defn)
    for name, defn_raw in raw.get("active", {}).items():
        defn = definition_from_dict(defn_raw)
        if defn.relation != name:
            raise ValueError(f"registry entry {name!r} holds a definition for {defn.relation!r}")
        registry.install(defn)
    return registry
