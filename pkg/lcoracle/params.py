"""lcoracle.params — the global parameter bundle every layer reads.

`GlobalParams` is frozen; build it with `GlobalParams.from_mapping(cfg)` from
the merged config dict (see `lcoracle.core.load_params`). Derived quantities
(μ, congestion cap, sparsifier level count) live here as properties so no
module recomputes them differently.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, Mapping

from lcoracle.errors import ConfigError


_CM_ENGINES = ("auto", "greedy", "localflow")


@dataclass(frozen=True)
class GlobalParams:
    eps: float = 0.25
    t: int = 2
    phi: float = 0.1
    delta: float = 0.01
    max_len: int = 2**20
    beta: int = 2
    sep_factor: int = 3
    kappa_sigma: int = 4
    router_branching: int = 3
    prune_factor: float = 100.0
    congestion_factor: float = 16.0
    cm_scale_x: int = 4
    cm_engine: str = "auto"
    k_cm: float = 8.0
    lf_delta: float = 0.5
    mwu_iter_const: int = 8
    k_mwu: float = 64.0
    closure_cap: int = 4
    max_levels: int = 3
    max_stack: int = 2
    real_diam_slack: float = 2.0
    stack_h: int = 4
    xi: int = 2
    sparsifier_level_factor: int = 100
    ed_budget: int = 2
    audit_every: int = 1
    path_enum_cap: int = 14
    dijkstra_cap: int = 300

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "GlobalParams":
        """Build from a flat dict; unknown keys and bad values raise ConfigError."""
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs: dict[str, Any] = {}
        for key, raw in data.items():
            if key not in known:
                raise ConfigError(f"unknown config key: {key}")
            default = known[key].default
            try:
                if isinstance(default, bool):
                    value: Any = bool(raw)
                elif isinstance(default, int):
                    value = int(raw)
                    if isinstance(raw, float) and raw != value:
                        raise ValueError(f"expected an integer, got {raw}")
                elif isinstance(default, float):
                    value = float(raw)
                else:
                    value = str(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
            kwargs[key] = value
        params = cls(**kwargs)
        params.validate()
        return params

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (int, float)) and value <= 0:
                raise ConfigError(f"{f.name} must be positive, got {value}")
        if self.cm_engine not in _CM_ENGINES:
            raise ConfigError(
                f"cm_engine must be one of {', '.join(_CM_ENGINES)}, got {self.cm_engine!r}"
            )
        if self.phi >= 1:
            raise ConfigError(f"phi must be < 1, got {self.phi}")
        if self.delta >= 1:
            raise ConfigError(f"delta must be < 1, got {self.delta}")
        if self.lf_delta >= 1:
            raise ConfigError(f"lf_delta must be < 1, got {self.lf_delta}")
        if self.sep_factor < 3:
            raise ConfigError(f"sep_factor must be >= 3, got {self.sep_factor}")
        if self.stack_h < 2:
            raise ConfigError(f"stack_h must be >= 2, got {self.stack_h}")

    def replace(self, **changes: Any) -> "GlobalParams":
        params = dataclasses.replace(self, **changes)
        params.validate()
        return params

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @property
    def mu(self) -> int:
        return 2 * self.t

    @property
    def congestion_cap(self) -> int:
        return math.ceil(self.congestion_factor / self.phi)

    @property
    def terminal_density(self) -> int:
        return math.ceil(1 / self.phi)

    def sparsifier_levels(self, h: int) -> int:
        """Number of doubling levels ĵ a sparsifier of bound h maintains."""
        return max(1, math.ceil(math.log2(self.sparsifier_level_factor * max(h, 1))))


DEFAULT_PARAMS = GlobalParams()


__all__ = ["GlobalParams", "DEFAULT_PARAMS"]
