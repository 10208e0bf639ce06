"""Deterministic test-function corpora for the ratio experiments.

Members are defined by recipes in physical coordinates, scaled to the half
width ``W`` of the evaluation region.  Random parameters come from a
generator seeded by ``(seed, role)`` only, so the same physical functions
appear at every resolution and refinement studies compare like with like.

``f`` members are supported inside the evaluation region (a smooth cutoff
of radius ``0.8 W``); ``b`` members are defined on the whole box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from fraclab.errors import GridError
from fraclab.grid import GridFunction, GridSpec, sample

ROLES = {"f": 1, "b": 2}
CORPUS_SIZE = 8

Coords = tuple[np.ndarray, ...]


def _dist(X: Coords, c: np.ndarray) -> np.ndarray:
    return np.sqrt(sum((x - ci) ** 2 for x, ci in zip(X, c)))


def _cutoff(X: Coords, omega: float) -> np.ndarray:
    """Smooth compactly supported cutoff, 1 at the origin, 0 beyond ``omega``."""
    s = np.minimum(_dist(X, np.zeros(len(X))) / omega, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(s < 1, np.exp(1.0 - 1.0 / np.maximum(1.0 - s * s, 1e-300)), 0.0)
    return out


def _gauss(X: Coords, c: np.ndarray, w: float) -> np.ndarray:
    return np.exp(-0.5 * (_dist(X, c) / w) ** 2)


def _trig(X: Coords, waves: np.ndarray, phases: np.ndarray, amps: np.ndarray) -> np.ndarray:
    out = 0.0
    for k, ph, a in zip(waves, phases, amps):
        out = out + a * np.cos(sum(ki * x for ki, x in zip(k, X)) + ph)
    return out


@dataclass(frozen=True, eq=False)
class CorpusMember:
    label: str
    recipe: str
    fn: Callable[..., np.ndarray]
    values: GridFunction


@dataclass(frozen=True, eq=False)
class Corpus:
    seed: int
    role: str
    members: tuple[CorpusMember, ...]

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, label: str) -> CorpusMember:
        for m in self.members:
            if m.label == label:
                return m
        raise KeyError(label)

    @property
    def labels(self) -> list[str]:
        return [m.label for m in self.members]

    def resampled(self, spec: GridSpec) -> Corpus:
        return Corpus(
            self.seed,
            self.role,
            tuple(CorpusMember(m.label, m.recipe, m.fn, sample(m.fn, spec)) for m in self.members),
        )

    def dilated(self, factor: float) -> Corpus:
        """Members ``x -> f(factor * x)`` resampled on the same grid."""
        out = []
        for m in self.members:
            fn = (lambda g: lambda *X: g(*(factor * x for x in X)))(m.fn)
            out.append(CorpusMember(m.label, f"{m.recipe}@x{factor:g}", fn, sample(fn, m.values.spec)))
        return Corpus(self.seed, self.role, tuple(out))


def _recipes(seed: int, role: str, dim: int, W: float) -> list[tuple[str, Callable]]:
    if role not in ROLES:
        raise GridError(f"corpus role must be 'f' or 'b', got {role!r}")
    rng = np.random.default_rng([int(seed), ROLES[role]])
    om = 0.8 * W
    # draw everything with fixed shapes so dim never changes the stream
    c = rng.uniform(-0.25, 0.25, size=(4, 2))[:, :dim] * om
    kmax = 1.5 * np.pi / om
    waves = [rng.uniform(-kmax, kmax, size=(3, 2))[:, :dim] for _ in range(2)]
    phases = rng.uniform(0, 2 * np.pi, size=(2, 3))
    amps = rng.uniform(0.5, 1.0, size=(2, 3))
    tip = 0.25 * dim

    if role == "f":
        def cut(g):
            return lambda *X: g(*X) * _cutoff(X, om)

        return [
            ("const", lambda *X: np.ones_like(X[0])),
            ("bump", cut(lambda *X: _gauss(X, c[0], 0.3 * om))),
            ("wide-bump", cut(lambda *X: _gauss(X, c[1], 0.6 * om))),
            ("power-tip", cut(lambda *X: (_dist(X, c[2]) ** 2 + (0.2 * om) ** 2) ** (-tip / 2))),
            ("trig", cut(lambda *X: _trig(X, waves[0], phases[0], amps[0]))),
            ("step", cut(lambda *X: 0.5 * (1 + np.tanh((X[0] - c[3][0]) / (0.2 * om))))),
            ("dipole", cut(lambda *X: _gauss(X, c[0], 0.35 * om) - _gauss(X, -c[1] + 0.3 * om, 0.35 * om))),
            ("trig-2", cut(lambda *X: _trig(X, waves[1], phases[1], amps[1]))),
        ]
    return [
        ("const", lambda *X: np.full_like(X[0], 2.0)),
        ("ramp", lambda *X: X[0] / om),
        ("bump", lambda *X: _gauss(X, c[0], 0.5 * om)),
        ("power-neg", lambda *X: (_dist(X, c[1]) ** 2 + (0.2 * om) ** 2) ** (-0.1)),
        ("power-pos", lambda *X: np.minimum(_dist(X, c[2]) / om, 1.0) ** 0.5),
        ("oscillation", lambda *X: np.sin(2.0 * np.pi * X[0] / om) * _gauss(X, np.zeros(dim), om)),
        ("trig", lambda *X: _trig(X, waves[0], phases[0], amps[0])),
        ("step", lambda *X: np.tanh((X[0] - c[3][0]) / (0.3 * om))),
    ]


def corpus_generate(seed: int, spec: GridSpec, role: str) -> Corpus:
    """Eight deterministic members for ``role`` in ``{"f", "b"}``.

    The first member is a constant control.
    """
    members = []
    for label, fn in _recipes(seed, role, spec.dim, spec.half_width):
        members.append(CorpusMember(label, f"{role}:{label}", fn, sample(fn, spec)))
    return Corpus(int(seed), role, tuple(members))
