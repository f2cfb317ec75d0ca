"""Closed-form scalar profiles on [0, 1] and the external force density f(t, x)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

PROFILE_KINDS = ("constant", "sinusoid", "gaussian", "tabulated")
FORCE_KINDS = ("zero", "constant", "tabulated")


@dataclass(frozen=True)
class Profile:
    """A function of x on [0, 1] given by a named preset.

    ``constant``:  value
    ``sinusoid``:  offset + amplitude * sin(2 pi frequency x + phase)
    ``gaussian``:  base + amplitude * exp(-(x - center)^2 / (2 width^2))
    ``tabulated``: piecewise-linear interpolation of (x, values); x must cover [0, 1]
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "tabulated":
            x = np.asarray(self.params["x"], dtype=float)
            v = np.asarray(self.params["values"], dtype=float)
            if x.ndim != 1 or x.shape != v.shape or x.size < 2:
                raise ValueError("tabulated profile needs matching 1d x and values")
            if np.any(np.diff(x) <= 0):
                raise ValueError("tabulated profile x must be strictly increasing")
            if x[0] > 0.0 or x[-1] < 1.0:
                raise ValueError("tabulated profile must cover [0, 1]")

    @classmethod
    def constant(cls, value: float) -> "Profile":
        return cls("constant", {"value": float(value)})

    @classmethod
    def sinusoid(cls, amplitude: float, frequency: float = 1.0, offset: float = 0.0,
                 phase: float = 0.0) -> "Profile":
        return cls("sinusoid", {"amplitude": float(amplitude), "frequency": float(frequency),
                                "offset": float(offset), "phase": float(phase)})

    @classmethod
    def gaussian(cls, base: float, amplitude: float, center: float = 0.5,
                 width: float = 0.1) -> "Profile":
        return cls("gaussian", {"base": float(base), "amplitude": float(amplitude),
                                "center": float(center), "width": float(width)})

    @classmethod
    def tabulated(cls, x, values) -> "Profile":
        return cls("tabulated", {"x": [float(a) for a in x], "values": [float(a) for a in values]})

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full_like(x, p["value"])
        if self.kind == "sinusoid":
            return p["offset"] + p["amplitude"] * np.sin(2.0 * np.pi * p["frequency"] * x + p["phase"])
        if self.kind == "gaussian":
            return p["base"] + p["amplitude"] * np.exp(-((x - p["center"]) ** 2) / (2.0 * p["width"] ** 2))
        return np.interp(x, p["x"], p["values"])

    def lipschitz(self) -> float:
        """Lipschitz constant on [0, 1] (exact for every preset)."""
        p = self.params
        if self.kind == "constant":
            return 0.0
        if self.kind == "sinusoid":
            return abs(p["amplitude"]) * 2.0 * np.pi * abs(p["frequency"])
        if self.kind == "gaussian":
            # max |d/dx| of the bump is attained at x = center +- width
            return abs(p["amplitude"]) / (p["width"] * np.sqrt(np.e))
        x, v = np.asarray(p["x"]), np.asarray(p["values"])
        return float(np.max(np.abs(np.diff(v) / np.diff(x))))

    def sample_points(self, n: int = 4097) -> np.ndarray:
        """Points at which bounds are checked; includes table nodes for tabulated data."""
        x = np.linspace(0.0, 1.0, n)
        if self.kind == "tabulated":
            nodes = np.asarray(self.params["x"])
            x = np.union1d(x, nodes[(nodes >= 0.0) & (nodes <= 1.0)])
        if self.kind == "gaussian":
            x = np.union1d(x, np.clip([self.params["center"]], 0.0, 1.0))
        return x

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, data: dict) -> "Profile":
        """Build through the named constructor so optional parameters get their defaults."""
        data = dict(data)
        kind = data.pop("kind")
        if kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {kind!r}")
        return getattr(cls, kind)(**data)


@dataclass(frozen=True)
class ForceSpec:
    """External force density f(t, x).

    ``zero``, ``constant`` (value c) or ``tabulated`` on a (t, x) grid with bilinear
    interpolation; the tabulated grid must cover [0, T] x [0, 1].
    """

    kind: str = "zero"
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FORCE_KINDS:
            raise ValueError(f"unknown force kind {self.kind!r}")
        if self.kind == "tabulated":
            t = np.asarray(self.params["t"], dtype=float)
            x = np.asarray(self.params["x"], dtype=float)
            v = np.asarray(self.params["values"], dtype=float)
            if v.shape != (t.size, x.size):
                raise ValueError("tabulated force values must have shape (len(t), len(x))")
            if t.size < 2 or x.size < 2 or np.any(np.diff(t) <= 0) or np.any(np.diff(x) <= 0):
                raise ValueError("tabulated force grid must be strictly increasing with >= 2 nodes")

    @classmethod
    def zero(cls) -> "ForceSpec":
        return cls("zero", {})

    @classmethod
    def constant(cls, value: float) -> "ForceSpec":
        return cls("constant", {"value": float(value)})

    @classmethod
    def tabulated(cls, t, x, values) -> "ForceSpec":
        return cls("tabulated", {"t": [float(a) for a in t], "x": [float(a) for a in x],
                                 "values": np.asarray(values, dtype=float).tolist()})

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind == "constant" and self.params["value"] == 0.0)

    def covers(self, horizon: float) -> bool:
        if self.kind != "tabulated":
            return True
        t, x = self.params["t"], self.params["x"]
        return t[0] <= 0.0 and t[-1] >= horizon and x[0] <= 0.0 and x[-1] >= 1.0

    def __call__(self, t: float, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "constant":
            return np.full_like(x, self.params["value"])
        tg = np.asarray(self.params["t"])
        xg = np.asarray(self.params["x"])
        v = np.asarray(self.params["values"])
        k = int(np.clip(np.searchsorted(tg, t, side="right") - 1, 0, tg.size - 2))
        s = float(np.clip((t - tg[k]) / (tg[k + 1] - tg[k]), 0.0, 1.0))
        row = (1.0 - s) * v[k] + s * v[k + 1]
        return np.interp(x, xg, row)

    def sup_norm(self, t: float) -> float:
        """max_x |f(t, x)| on [0, 1]."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self.params["value"])
        xg = np.asarray(self.params["x"])
        nodes = np.concatenate([[0.0, 1.0], xg[(xg > 0.0) & (xg < 1.0)]])
        # piecewise linear in x at fixed t: extremes sit on nodes
        return float(np.max(np.abs(self(t, nodes))))

    def l1_norm(self, t: float) -> float:
        """int_0^1 |f(t, x)| dx."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self.params["value"])
        x = np.linspace(0.0, 1.0, 20001)
        return float(np.trapezoid(np.abs(self(t, x)), x))

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, data: dict) -> "ForceSpec":
        data = dict(data)
        kind = data.pop("kind", "zero")
        if kind not in FORCE_KINDS:
            raise ValueError(f"unknown force kind {kind!r}")
        return getattr(cls, kind)(**data)
