"""Run configuration: a flat sectioned ``key = value`` format.

Grammar::

    # comment                     (also after a value)
    [section]                     grid, ladder, quad, kernel, run, task
    [experiment.<name>]           one block per experiment
    key = value

Defaults (an empty file is valid):

==========  ============  =====================================
section     key           default
==========  ============  =====================================
grid        dim           2
grid        N             64
grid        L             1.0
grid        margin        24
ladder      r_min         0.046875
ladder      ratio         2.0
ladder      count         2
ladder      stride        2
quad        s_min, s_max  derived from the kernel and alpha
quad        steps         512 (only with s_min and s_max)
kernel      name          heat
run         seed          0
run         output        out
run         resolutions   64, 128
task        t, alpha, m   0.005, 0.5, 1
task        f, b          bump, ramp
task        norm          campanato_L
task        p, beta       2.0, -0.5
task        route         semigroup
task        points        48
==========  ============  =====================================

Experiment keys: ``kind`` (commutator, hls, morrey, inclusion), the
exponents ``alpha p1 beta1 p2 beta2 m`` or ``p beta gamma``, ``target``
(campanatoL or morrey), ``route`` (riesz or semigroup) and ``budget``.
Without experiment blocks the three default commutator index sets and an
inclusion run are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from fraclab.errors import ConfigError, FraclabError, IndexWindowError
from fraclab.fracint import QuadratureSpec
from fraclab.grid import BallLadder, GridSpec
from fraclab.harness import DRIFT_BUDGET, IndexSet, derive_indices
from fraclab.semigroup import family_by_name


def _int(v: str) -> int:
    try:
        return int(v)
    except ValueError:
        pass
    try:
        f = float(v)
    except ValueError:
        f = math.nan
    if not (math.isfinite(f) and f == int(f)):
        raise ValueError(f"expected an integer, got {v!r}")
    return int(f)


def _float(v: str) -> float:
    try:
        x = float(v)
    except ValueError:
        raise ValueError(f"expected a number, got {v!r}") from None
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {v!r}")
    return x


def _str(v: str) -> str:
    if not v:
        raise ValueError("expected a non-empty value")
    return v


def _int_list(v: str) -> tuple[int, ...]:
    return tuple(_int(x.strip()) for x in v.split(",") if x.strip())


SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "grid": {"dim": (_int, 2), "N": (_int, 64), "L": (_float, 1.0), "margin": (_int, 24)},
    "ladder": {"r_min": (_float, 0.046875), "ratio": (_float, 2.0), "count": (_int, 2), "stride": (_int, 2)},
    "quad": {"s_min": (_float, None), "s_max": (_float, None), "steps": (_int, 512)},
    "kernel": {"name": (_str, "heat")},
    "run": {"seed": (_int, 0), "output": (_str, "out"), "resolutions": (_int_list, (64, 128))},
    "task": {
        "t": (_float, 0.005), "alpha": (_float, 0.5), "m": (_int, 1), "f": (_str, "bump"),
        "b": (_str, "ramp"), "norm": (_str, "campanato_L"), "p": (_float, 2.0),
        "beta": (_float, -0.5), "route": (_str, "semigroup"), "points": (_int, 48),
    },
}

EXPERIMENT_KEYS: dict[str, Callable[[str], Any]] = {
    "kind": _str, "alpha": _float, "p1": _float, "beta1": _float, "p2": _float, "beta2": _float,
    "m": _int, "p": _float, "beta": _float, "gamma": _float, "target": _str, "route": _str,
    "budget": _float,
}
EXPERIMENT_KINDS = ("commutator", "hls", "morrey", "inclusion")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: str
    params: dict[str, Any]
    index_set: IndexSet | None = None
    budget: float = DRIFT_BUDGET


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    ladder: BallLadder
    quad: QuadratureSpec | None
    kernel: str
    seed: int
    output: str
    resolutions: tuple[int, ...]
    task: dict[str, Any]
    experiments: tuple[ExperimentConfig, ...] = field(default=())


def default_experiments(dim: int = 2) -> tuple[ExperimentConfig, ...]:
    """The three reference commutator index sets and one inclusion run."""
    out = []
    for name, m, b2 in (("commutator-m1", 1, -0.75), ("commutator-m2", 2, -0.75), ("commutator-endpoint", 1, -1.0)):
        params = {"alpha": 0.5, "p1": 4.0, "beta1": -0.25, "p2": 2.0, "beta2": b2, "m": m, "target": "campanatoL"}
        if dim == 2:
            idx = derive_indices(0.5, 4.0, -0.25, 2.0, b2, m, 2)
            out.append(ExperimentConfig(name, "commutator", params, idx))
    out.append(ExperimentConfig("inclusion", "inclusion", {"p": 2.0, "gamma": -0.5}))
    return tuple(out)


def _tokenize(text: str):
    """Yield ``(line_no, section, key, value)``; section headers have ``key=None``."""
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {raw.strip()!r}", line=no)
            section = line[1:-1].strip()
            yield no, section, None, None
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=no)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=no)
        if section is None:
            if "." not in key:
                raise ConfigError("key outside any section", key=key, line=no)
            sec, key = key.rsplit(".", 1)
            if sec.startswith("experiment."):
                yield no, sec, None, "implicit"
            yield no, sec, key, value
            continue
        yield no, section, key, value


def parse_config(text: str, overrides: Sequence[str] = ()) -> RunConfig:
    """Parse ``text`` into a :class:`RunConfig`, failing on the first bad key.

    ``overrides`` are ``section.key=value`` strings applied after the file;
    they may replace keys the file sets.  Their line numbers count from the
    end of the file.
    """
    values: dict[str, dict[str, tuple[Any, int]]] = {s: {} for s in SCHEMA}
    experiments: dict[str, dict[str, tuple[Any, int]]] = {}
    headers: dict[str, int] = {}
    n_file = len(text.splitlines())
    tokens = [(t, False) for t in _tokenize(text)]
    for i, o in enumerate(overrides):
        if "=" not in o or "." not in o.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {o!r}")
        tokens += [((no + n_file + i, *rest), True) for no, *rest in _tokenize(o)]
    for (no, section, key, raw), override in tokens:
        if key is None:
            if section.startswith("experiment."):
                name = section.split(".", 1)[1].strip()
                if not name:
                    raise ConfigError("experiment section needs a name", line=no)
                if name in experiments:
                    if override or raw == "implicit":
                        continue
                    raise ConfigError(f"duplicate experiment '{name}'", line=no)
                experiments[name] = {}
                headers[name] = no
            elif section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", line=no)
            continue
        if section.startswith("experiment."):
            name = section.split(".", 1)[1].strip()
            full = f"{section}.{key}"
            if key not in EXPERIMENT_KEYS:
                raise ConfigError("unknown key", key=full, line=no)
            target = experiments[name]
            conv = EXPERIMENT_KEYS[key]
        else:
            full = f"{section}.{key}"
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", key=full, line=no)
            if key not in SCHEMA[section]:
                raise ConfigError("unknown key", key=full, line=no)
            target = values[section]
            conv = SCHEMA[section][key][0]
        if key in target and not override:
            raise ConfigError("duplicate key", key=full, line=no)
        try:
            target[key] = (conv(raw), no)
        except ValueError as exc:
            raise ConfigError(f"type mismatch: {exc}", key=full, line=no) from None

    def get(section: str, key: str):
        if key in values[section]:
            return values[section][key]
        return SCHEMA[section][key][1], None

    def build(section: str, keys: tuple[str, ...], ctor):
        args = [get(section, k)[0] for k in keys]
        try:
            return ctor(*args)
        except FraclabError as exc:
            # blame the first explicitly given key, or the first key
            given = [k for k in keys if k in values[section]]
            k = given[0] if given else keys[0]
            for cand in given:
                if cand in str(exc):
                    k = cand
                    break
            raise ConfigError(str(exc), key=f"{section}.{k}", line=get(section, k)[1]) from None

    N, line = get("grid", "N")
    if N < 16 or N & (N - 1):
        raise ConfigError(f"N must be a power of two >= 16, got {N}", key="grid.N", line=line)
    grid = build("grid", ("dim", "L", "N", "margin"), GridSpec)
    ladder = build("ladder", ("r_min", "ratio", "count", "stride"), BallLadder)
    try:
        ladder.validate(grid)
    except FraclabError as exc:
        raise ConfigError(str(exc), key="ladder.r_min", line=get("ladder", "r_min")[1]) from None

    quad = None
    if "s_min" in values["quad"] or "s_max" in values["quad"]:
        if not ("s_min" in values["quad"] and "s_max" in values["quad"]):
            k = "s_max" if "s_min" in values["quad"] else "s_min"
            raise ConfigError("s_min and s_max must be given together", key=f"quad.{k}",
                              line=get("quad", "s_min" if k == "s_max" else "s_max")[1])
        quad = build("quad", ("s_min", "s_max", "steps"), QuadratureSpec)
    elif "steps" in values["quad"]:
        raise ConfigError("steps needs s_min and s_max", key="quad.steps", line=values["quad"]["steps"][1])

    kernel, kline = get("kernel", "name")
    try:
        family_by_name(kernel, grid.dim)
    except FraclabError as exc:
        raise ConfigError(str(exc), key="kernel.name", line=kline) from None

    res, rline = get("run", "resolutions")
    if not res:
        raise ConfigError("at least one resolution is required", key="run.resolutions", line=rline)
    for r in res:
        if r < 16 or r & (r - 1):
            raise ConfigError(f"N must be a power of two >= 16, got {r}", key="run.resolutions", line=rline)

    exps = []
    for name, kv in experiments.items():
        exps.append(_experiment(name, kv, headers[name], grid.dim))
    if not experiments:
        exps = list(default_experiments(grid.dim))

    task = {k: get("task", k)[0] for k in SCHEMA["task"]}
    return RunConfig(
        grid, ladder, quad, kernel, get("run", "seed")[0], get("run", "output")[0], tuple(res),
        task, tuple(exps),
    )


_SYMBOL_KEYS = (
    ("β₂", "beta2"), ("β₁", "beta1"), ("p₂", "p2"), ("p₁", "p1"), ("m ≥", "m"), ("α", "alpha"),
)


def _experiment(name: str, kv: dict[str, tuple[Any, int]], header: int, dim: int) -> ExperimentConfig:
    params = {k: v for k, (v, _) in kv.items()}

    def where(key: str) -> tuple[str, int]:
        return f"experiment.{name}.{key}", kv[key][1] if key in kv else header

    kind = params.pop("kind", None)
    if kind is None:
        raise ConfigError("missing 'kind'", key=f"experiment.{name}", line=header)
    if kind not in EXPERIMENT_KINDS:
        k, ln = where("kind")
        raise ConfigError(f"kind must be one of {', '.join(EXPERIMENT_KINDS)}", key=k, line=ln)
    budget = params.pop("budget", DRIFT_BUDGET)
    required = {
        "commutator": ("alpha", "p1", "beta1", "p2", "beta2"),
        "hls": ("alpha", "p"),
        "morrey": ("alpha", "p", "beta"),
        "inclusion": ("p", "gamma"),
    }[kind]
    for k in required:
        if k not in params:
            raise ConfigError(f"missing '{k}' for kind {kind}", key=f"experiment.{name}", line=header)
    idx = None
    if kind == "commutator":
        params.setdefault("m", 1)
        params.setdefault("target", "campanatoL")
        if params["target"] not in ("campanatoL", "morrey"):
            k, ln = where("target")
            raise ConfigError("target must be campanatoL or morrey", key=k, line=ln)
        try:
            idx = derive_indices(params["alpha"], params["p1"], params["beta1"], params["p2"],
                                 params["beta2"], params["m"], dim)
        except IndexWindowError as exc:
            key = next((k for sym, k in _SYMBOL_KEYS if sym in exc.constraint and k in kv), None)
            if key is None:
                raise ConfigError(str(exc), key=f"experiment.{name}", line=header) from None
            k, ln = where(key)
            raise ConfigError(str(exc), key=k, line=ln) from None
    if kind in ("hls", "morrey"):
        params.setdefault("route", "riesz")
        if params["route"] not in ("riesz", "semigroup"):
            k, ln = where("route")
            raise ConfigError("route must be riesz or semigroup", key=k, line=ln)
    if kind == "inclusion" and params["gamma"] == 0:
        k, ln = where("gamma")
        raise ConfigError("the inclusion of C^{p,γ} in C_L^{p,γ} requires γ ≠ 0", key=k, line=ln)
    return ExperimentConfig(name, kind, params, idx, budget)


def load_config(path: str | None, overrides: Sequence[str] = ()) -> RunConfig:
    if path is None:
        return parse_config("", overrides)
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)
