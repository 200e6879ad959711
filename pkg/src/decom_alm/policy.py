"""Investment strategies: the risky fraction as a function of time and state.

Every strategy exposes ``weights(t, A, D, L, S)`` working on arrays of
path states; the scalar :func:`evaluate` wraps it for a single
:class:`AlmState`.  Outputs are always clamped to ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Protocol

import numpy as np

from .errors import ConfigurationError, EvaluationError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class AlmState:
    t: float
    A: float
    D: float
    L: float
    S: float | None = None

    @property
    def funding_ratio(self) -> float:
        if not self.L > 0:
            raise EvaluationError("funding ratio undefined for L <= 0")
        return (self.A - self.D) / self.L


def funding_ratio(A, D, L) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if np.any(L <= 0):
        raise EvaluationError("funding ratio undefined for L <= 0")
    return (np.asarray(A, dtype=float) - np.asarray(D, dtype=float)) / L


class PolicyTable(Protocol):
    """What a tabulated strategy needs from a solved policy."""

    model_kind: str

    def phi_at(self, t: float, A: np.ndarray, D: np.ndarray, S: np.ndarray | None) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantMix:
    w: float = 0.5

    kind = "constant-mix"

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"constant-mix weight must lie in [0, 1], got {self.w}")

    def weights(self, t, A, D, L, S=None):
        return np.full(np.shape(A), self.w, dtype=float)


@dataclass(frozen=True)
class Quadratic:
    """``F(x) = c x^2 + b x + a`` in the funding ratio ``x``."""

    a: float
    b: float
    c: float

    kind = "quadratic"

    def raw(self, x):
        return self.a + self.b * x + self.c * x * x

    def weights(self, t, A, D, L, S=None):
        return np.clip(self.raw(funding_ratio(A, D, L)), 0.0, 1.0)


@dataclass(frozen=True)
class LinearQuadratic:
    """``F(t, x) = (a0 + a1 t) + (b0 + b1 t) x + (c0 + c1 t) x^2``."""

    a0: float
    a1: float
    b0: float
    b1: float
    c0: float
    c1: float

    kind = "linear-quadratic"

    def raw(self, t, x):
        return (self.a0 + self.a1 * t) + (self.b0 + self.b1 * t) * x + (self.c0 + self.c1 * t) * x * x

    def weights(self, t, A, D, L, S=None):
        return np.clip(self.raw(t, funding_ratio(A, D, L)), 0.0, 1.0)


@dataclass(frozen=True)
class Tabulated:
    """Policy read off a solved grid; ``source`` records where it came from."""

    table: Any
    source: str = ""

    kind = "tabulated"

    @property
    def model_kind(self) -> str:
        return self.table.model_kind

    def weights(self, t, A, D, L, S=None):
        A = np.asarray(A, dtype=float)
        phi = self.table.phi_at(t, A, np.asarray(D, dtype=float), None if S is None else np.asarray(S, dtype=float))
        return np.clip(phi, 0.0, 1.0)


Strategy = ConstantMix | Quadratic | LinearQuadratic | Tabulated


def evaluate(strategy: Strategy, state: AlmState) -> float:
    S = None if state.S is None else np.array([state.S])
    out = strategy.weights(state.t, np.array([state.A]), np.array([state.D]), np.array([state.L]), S)
    return float(out[0])


_KINDS = {cls.kind: cls for cls in (ConstantMix, Quadratic, LinearQuadratic)}


def to_text(strategy: Strategy, extra: dict[str, Any] | None = None) -> str:
    """Flat ``key = value`` text; floats are written with full precision."""
    if isinstance(strategy, Tabulated):
        items = {"kind": strategy.kind, "solve_dir": strategy.source}
    else:
        items = {"kind": strategy.kind}
        items.update({f.name: repr(float(getattr(strategy, f.name))) for f in fields(strategy)})
    items = {"format_version": FORMAT_VERSION, **items, **(extra or {})}
    return "".join(f"{k} = {v}\n" for k, v in items.items())


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"malformed key-value line: {line!r}")
        out[key.strip()] = value.strip()
    return out


def from_text(text: str, table_loader=None) -> Strategy:
    kv = parse_kv(text)
    kind = kv.get("kind")
    if kind == Tabulated.kind:
        if table_loader is None:
            raise ConfigurationError("tabulated strategy needs a solve-result loader")
        return Tabulated(table_loader(kv["solve_dir"]), source=kv["solve_dir"])
    if kind not in _KINDS:
        raise ConfigurationError(f"unknown strategy kind {kind!r}")
    cls = _KINDS[kind]
    try:
        return cls(**{f.name: float(kv[f.name]) for f in fields(cls)})
    except KeyError as exc:
        raise ConfigurationError(f"strategy file lacks coefficient {exc.args[0]!r}") from None


def save_strategy(strategy: Strategy, path: str | Path, extra: dict[str, Any] | None = None) -> None:
    Path(path).write_text(to_text(strategy, extra))


def load_strategy(path: str | Path, table_loader=None) -> Strategy:
    return from_text(Path(path).read_text(), table_loader)
