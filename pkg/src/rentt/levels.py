"""Decision levels: how one tree level picks a branch from a node's matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Level:
    """One depth of the tree.

    ``kind == "neuron"``: branch is the activation region of ``row @ x`` with
    region boundaries ``breakpoints``. ``kind == "pool"``: branch is the
    position of the largest of ``rows @ x`` (first position on ties).
    ``layer``/``unit``/``timestep`` locate the level in the network.
    """

    kind: str
    layer: int
    unit: int
    branching: int
    rows: tuple[int, ...]
    breakpoints: tuple[float, ...] = ()
    timestep: int | None = None
    neuron: int = field(default=0)

    def decide(self, effective: np.ndarray, x0: np.ndarray) -> int:
        if self.kind == "neuron":
            z = effective[self.rows[0]] @ x0
            if np.isnan(z):
                raise ValueError("NaN decision value")
            return int(np.searchsorted(self.breakpoints, z, side="right"))
        return int(np.argmax(effective[list(self.rows)] @ x0))

    def decide_batch(self, effective: np.ndarray, X: np.ndarray) -> np.ndarray:
        if self.kind == "neuron":
            z = X @ effective[self.rows[0]]
            return np.searchsorted(self.breakpoints, z, side="right")
        return np.argmax(X @ effective[list(self.rows)].T, axis=1)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "layer": self.layer,
            "unit": self.unit,
            "neuron": self.neuron,
            "branching": self.branching,
            "rows": list(self.rows),
        }
        if self.kind == "neuron":
            d["breakpoints"] = list(self.breakpoints)
        if self.timestep is not None:
            d["timestep"] = self.timestep
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Level":
        return cls(
            kind=d["kind"],
            layer=d["layer"],
            unit=d["unit"],
            branching=d["branching"],
            rows=tuple(d["rows"]),
            breakpoints=tuple(d.get("breakpoints", ())),
            timestep=d.get("timestep"),
            neuron=d.get("neuron", 0),
        )
