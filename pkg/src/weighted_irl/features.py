"""Per-state feature maps shared by the reward and weight parameterizations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .mdp import ContractError


@dataclass(frozen=True)
class FeatureMap:
    """Feature table ``values[s, i]`` (or ``values[s, a, i]`` for per-action features).

    ``bounds`` records the (low, high) range each continuous column is
    discretized over, so freshly generated environments share thresholds.
    """

    values: np.ndarray
    names: tuple[str, ...] = ()
    mode: str = "continuous"
    bounds: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (2, 3):
            raise ContractError(f"feature table must be 2-D or 3-D, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ContractError("features must be finite")
        if self.mode not in ("continuous", "discrete"):
            raise ContractError(f"unknown feature mode {self.mode!r}")
        if self.mode == "discrete" and not np.all((v == 0) | (v == 1)):
            raise ContractError("discrete features must be 0/1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        names = tuple(self.names) or tuple(f"f{i}" for i in range(v.shape[-1]))
        if len(names) != v.shape[-1]:
            raise ContractError("one name per feature column required")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "bounds", tuple(tuple(map(float, b)) for b in self.bounds))

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    @property
    def per_action(self) -> bool:
        return self.values.ndim == 3

    def select(self, columns) -> "FeatureMap":
        """Restrict to a subset of columns (by index)."""
        columns = list(columns)
        bounds = tuple(self.bounds[c] for c in columns) if self.bounds else ()
        return FeatureMap(
            self.values[..., columns], tuple(self.names[c] for c in columns), self.mode, bounds
        )

    def with_constant(self) -> "FeatureMap":
        """Append an all-ones column named ``bias``."""
        ones = np.ones(self.values.shape[:-1] + (1,))
        bounds = self.bounds + ((1.0, 1.0),) if self.bounds else ()
        return FeatureMap(
            np.concatenate([self.values, ones], axis=-1), self.names + ("bias",), self.mode, bounds
        )

    def metadata(self) -> dict[str, Any]:
        return {"names": list(self.names), "dim": self.dim, "mode": self.mode}

    def to_dict(self) -> dict[str, Any]:
        return {
            "names": list(self.names),
            "mode": self.mode,
            "bounds": [list(b) for b in self.bounds],
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FeatureMap":
        return cls(
            np.asarray(d["values"], dtype=float),
            tuple(d["names"]),
            d["mode"],
            tuple(tuple(b) for b in d.get("bounds", ())),
        )


def discretize_features(features: FeatureMap, thresholds_per_feature: int) -> FeatureMap:
    """Replace each continuous column by indicators ``value < t_k``.

    Thresholds are ``lo + k * (hi - lo) / n`` for ``k = 1..n`` where ``(lo, hi)``
    comes from ``features.bounds`` if present, otherwise the column's range.
    """
    n = int(thresholds_per_feature)
    if n < 1:
        raise ContractError("thresholds_per_feature must be >= 1")
    if features.mode != "continuous":
        raise ContractError("discretize_features expects continuous features")
    v = features.values
    cols, names = [], []
    for i in range(features.dim):
        if features.bounds:
            lo, hi = features.bounds[i]
        else:
            lo, hi = float(v[..., i].min()), float(v[..., i].max())
        thresholds = lo + (hi - lo) * np.arange(1, n + 1) / n
        cols.append((v[..., i, None] < thresholds).astype(float))
        names.extend(f"{features.names[i]}<{t:.4g}" for t in thresholds)
    return FeatureMap(np.concatenate(cols, axis=-1), tuple(names), "discrete")
