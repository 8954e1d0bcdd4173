"""Simulation and experiment configuration.

Configs are YAML documents. Parsing keeps the source line of every key so
validation errors point at the offending line. The same dictionary schema is
used for run manifests, so a manifest's ``config`` block can be fed back in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .datagen import CLASS_MEANS, RegressionAgentSpec
from .errors import InvalidInputError
from .trust import SCHEMES, TrustScheme

KINDS = ("regression_toy", "weak_node_toy", "classification_toy", "custom")


class ConfigError(InvalidInputError):
    pass


@dataclass(frozen=True)
class PolyAgent:
    degree: int
    data: RegressionAgentSpec


@dataclass(frozen=True)
class MlpAgent:
    mixture: tuple[float, ...]
    hidden: tuple[int, ...] = (5, 10)
    n: int = 200
    flip_fraction: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mixture", tuple(float(v) for v in self.mixture))
        object.__setattr__(self, "hidden", tuple(int(v) for v in self.hidden))


@dataclass(frozen=True)
class SimulationConfig:
    agents: tuple
    rounds: int = 20
    warmup_rounds: int = 0
    lam: float = 0.5
    trust: TrustScheme = TrustScheme("dynamic")
    seed: int = 0
    consensus_threshold: float = 1e-2
    # regression shared grid
    shared_lo: float = -4.0
    shared_hi: float = 4.0
    shared_n: int = 50
    # classification
    n_shared_per_class: int = 50
    class_means: tuple[tuple[float, float], ...] = CLASS_MEANS
    dirichlet_alpha: float | None = None
    learning_rate: float = 0.1
    local_epochs: int = 5
    init_epochs: int = 100
    batch_size_local: int = 64
    batch_size_shared: int = 256

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if len(self.agents) < 2:
            raise ConfigError("need at least two agents")
        kinds = {type(a) for a in self.agents}
        if len(kinds) != 1:
            raise ConfigError("agents must all be polynomial or all be MLP")
        if self.rounds < 1:
            raise ConfigError("rounds must be at least 1")
        if not 0 <= self.warmup_rounds < self.rounds:
            raise ConfigError("warmup_rounds must satisfy 0 <= warmup_rounds < rounds")
        if self.lam < 0:
            raise ConfigError("lambda must be non-negative")
        if not self.consensus_threshold > 0:
            raise ConfigError("consensus_threshold must be positive")
        if self.task == "classification" and self.dirichlet_alpha is None:
            c = len(self.class_means)
            for a in self.agents:
                if len(a.mixture) != c:
                    raise ConfigError(f"mixture needs {c} weights")

    @property
    def task(self) -> str:
        return "regression" if isinstance(self.agents[0], PolyAgent) else "classification"

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def replace(self, **changes) -> SimulationConfig:
        return config_from_dict({**config_to_dict(self), **changes})


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    simulation: SimulationConfig
    seeds: tuple[int, ...]
    out: str = "runs"
    source: dict = field(default_factory=dict, compare=False)


# --- dict <-> dataclass -------------------------------------------------------

SIM_KEYS = {
    "agents", "rounds", "warmup_rounds", "lambda", "trust", "seed", "consensus_threshold",
    "shared", "training", "class_means", "dirichlet_alpha",
}
EXPERIMENT_KEYS = SIM_KEYS | {"kind", "seeds", "out"}
TRUST_KEYS = {"scheme", "confidence_weighted", "entropy_floor"}
SHARED_KEYS = {"lo", "hi", "n", "n_per_class"}
TRAINING_KEYS = {"learning_rate", "local_epochs", "init_epochs", "batch_size_local", "batch_size_shared"}
POLY_KEYS = {"model", "degree", "x_mean", "x_std", "n", "noise_std"}
MLP_KEYS = {"model", "hidden", "n", "mixture", "flip_fraction"}


class _Ctx:
    def __init__(self, lines: dict[str, int] | None):
        self.lines = lines or {}

    def fail(self, path: str, msg: str):
        line = self.lines.get(path)
        where = f"line {line}: " if line else ""
        raise ConfigError(f"{where}{path}: {msg}")

    def mapping(self, value, path: str, allowed: set[str]) -> dict:
        if not isinstance(value, dict):
            self.fail(path, "expected a mapping")
        for key in value:
            if key not in allowed:
                self.fail(f"{path}.{key}" if path else key, f"unknown key {key!r}")
        return value

    def number(self, value, path: str, *, integer=False, lo=None, hi=None, lo_open=False) -> float | int:
        if isinstance(value, bool):
            self.fail(path, "expected a number")
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                self.fail(path, f"expected a number, got {value!r}")
        if not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        if integer:
            if float(value) != int(value):
                self.fail(path, f"expected an integer, got {value!r}")
            value = int(value)
        else:
            value = float(value)
        if lo is not None and (value <= lo if lo_open else value < lo):
            self.fail(path, f"must be {'>' if lo_open else '>='} {lo}, got {value}")
        if hi is not None and value > hi:
            self.fail(path, f"must be <= {hi}, got {value}")
        return value

    def seq(self, value, path: str) -> list:
        if not isinstance(value, list):
            self.fail(path, "expected a list")
        return value


def _agent_from_dict(d, path: str, ctx: _Ctx):
    model = d.get("model") if isinstance(d, dict) else None
    if model == "poly":
        ctx.mapping(d, path, POLY_KEYS)
        return PolyAgent(
            degree=ctx.number(d.get("degree", 4), f"{path}.degree", integer=True, lo=0),
            data=RegressionAgentSpec(
                x_mean=ctx.number(d.get("x_mean", 0.0), f"{path}.x_mean"),
                x_std=ctx.number(d.get("x_std", 1.0), f"{path}.x_std", lo=0, lo_open=True),
                n=ctx.number(d.get("n", 50), f"{path}.n", integer=True, lo=1),
                noise_std=ctx.number(d.get("noise_std", 1.0), f"{path}.noise_std", lo=0),
            ),
        )
    if model == "mlp":
        ctx.mapping(d, path, MLP_KEYS)
        mixture = tuple(
            ctx.number(v, f"{path}.mixture[{k}]", lo=0) for k, v in enumerate(ctx.seq(d.get("mixture", []), f"{path}.mixture"))
        )
        if mixture and abs(sum(mixture) - 1.0) > 1e-9:
            ctx.fail(f"{path}.mixture", "weights must sum to 1")
        hidden = tuple(
            ctx.number(v, f"{path}.hidden[{k}]", integer=True, lo=1)
            for k, v in enumerate(ctx.seq(d.get("hidden", [5, 10]), f"{path}.hidden"))
        )
        return MlpAgent(
            mixture=mixture,
            hidden=hidden,
            n=ctx.number(d.get("n", 200), f"{path}.n", integer=True, lo=1),
            flip_fraction=ctx.number(d.get("flip_fraction", 0.0), f"{path}.flip_fraction", lo=0, hi=1),
        )
    ctx.fail(f"{path}.model", f"model must be 'poly' or 'mlp', got {model!r}")


def config_from_dict(d: dict, lines: dict[str, int] | None = None) -> SimulationConfig:
    """Build a :class:`SimulationConfig` from the documented dictionary schema."""
    ctx = _Ctx(lines)
    ctx.mapping(d, "", EXPERIMENT_KEYS)
    if "agents" not in d:
        ctx.fail("agents", "missing required key")
    agents = [_agent_from_dict(a, f"agents[{k}]", ctx) for k, a in enumerate(ctx.seq(d["agents"], "agents"))]
    if len(agents) < 2:
        ctx.fail("agents", "need at least two agents")
    if len({type(a) for a in agents}) != 1:
        ctx.fail("agents", "agents must all be polynomial or all be MLP")
    kw: dict[str, Any] = {"agents": tuple(agents)}

    rounds = ctx.number(d.get("rounds", 20), "rounds", integer=True, lo=1)
    warmup = ctx.number(d.get("warmup_rounds", 0), "warmup_rounds", integer=True, lo=0)
    if warmup >= rounds:
        ctx.fail("warmup_rounds", f"must be smaller than rounds ({rounds})")
    kw.update(rounds=rounds, warmup_rounds=warmup)
    kw["lam"] = ctx.number(d.get("lambda", 0.5), "lambda", lo=0)
    kw["seed"] = ctx.number(d.get("seed", 0), "seed", integer=True, lo=0)
    kw["consensus_threshold"] = ctx.number(d.get("consensus_threshold", 1e-2), "consensus_threshold", lo=0, lo_open=True)

    t = ctx.mapping(d.get("trust", {}), "trust", TRUST_KEYS)
    scheme = t.get("scheme", "dynamic")
    if scheme not in SCHEMES:
        ctx.fail("trust.scheme", f"must be one of {SCHEMES}, got {scheme!r}")
    cw = t.get("confidence_weighted", True)
    if not isinstance(cw, bool):
        ctx.fail("trust.confidence_weighted", "expected true or false")
    kw["trust"] = TrustScheme(scheme, cw, ctx.number(t.get("entropy_floor", 1e-3), "trust.entropy_floor", lo=0, lo_open=True))

    s = ctx.mapping(d.get("shared", {}), "shared", SHARED_KEYS)
    if isinstance(agents[0], PolyAgent):
        lo = ctx.number(s.get("lo", -4.0), "shared.lo")
        hi = ctx.number(s.get("hi", 4.0), "shared.hi")
        if not lo < hi:
            ctx.fail("shared.hi", "must exceed shared.lo")
        kw.update(shared_lo=lo, shared_hi=hi, shared_n=ctx.number(s.get("n", 50), "shared.n", integer=True, lo=2))
    else:
        kw["n_shared_per_class"] = ctx.number(s.get("n_per_class", 50), "shared.n_per_class", integer=True, lo=1)
        means = d.get("class_means")
        if means is not None:
            kw["class_means"] = tuple(
                (ctx.number(m[0], f"class_means[{k}]"), ctx.number(m[1], f"class_means[{k}]"))
                for k, m in enumerate(ctx.seq(means, "class_means"))
            )
        if d.get("dirichlet_alpha") is not None:
            kw["dirichlet_alpha"] = ctx.number(d["dirichlet_alpha"], "dirichlet_alpha", lo=0, lo_open=True)
        else:
            n_cls = len(kw.get("class_means", CLASS_MEANS))
            for k, a in enumerate(agents):
                if len(a.mixture) != n_cls:
                    ctx.fail(f"agents[{k}].mixture", f"needs {n_cls} weights")

    tr = ctx.mapping(d.get("training", {}), "training", TRAINING_KEYS)
    kw["learning_rate"] = ctx.number(tr.get("learning_rate", 0.1), "training.learning_rate", lo=0, lo_open=True)
    for key, default in (("local_epochs", 5), ("init_epochs", 100), ("batch_size_local", 64), ("batch_size_shared", 256)):
        kw[key] = ctx.number(tr.get(key, default), f"training.{key}", integer=True, lo=1)
    return SimulationConfig(**kw)


def config_to_dict(cfg: SimulationConfig) -> dict:
    d: dict[str, Any] = {
        "rounds": cfg.rounds,
        "warmup_rounds": cfg.warmup_rounds,
        "lambda": cfg.lam,
        "seed": cfg.seed,
        "consensus_threshold": cfg.consensus_threshold,
        "trust": {
            "scheme": cfg.trust.variant,
            "confidence_weighted": cfg.trust.confidence_weighted,
            "entropy_floor": cfg.trust.entropy_floor,
        },
        "training": {
            "learning_rate": cfg.learning_rate,
            "local_epochs": cfg.local_epochs,
            "init_epochs": cfg.init_epochs,
            "batch_size_local": cfg.batch_size_local,
            "batch_size_shared": cfg.batch_size_shared,
        },
    }
    agents = []
    for a in cfg.agents:
        if isinstance(a, PolyAgent):
            agents.append({
                "model": "poly", "degree": a.degree, "x_mean": a.data.x_mean, "x_std": a.data.x_std,
                "n": a.data.n, "noise_std": a.data.noise_std,
            })
        else:
            agents.append({
                "model": "mlp", "hidden": list(a.hidden), "n": a.n,
                "mixture": list(a.mixture), "flip_fraction": a.flip_fraction,
            })
    d["agents"] = agents
    if cfg.task == "regression":
        d["shared"] = {"lo": cfg.shared_lo, "hi": cfg.shared_hi, "n": cfg.shared_n}
    else:
        d["shared"] = {"n_per_class": cfg.n_shared_per_class}
        d["class_means"] = [[float(v) for v in m] for m in cfg.class_means]
        if cfg.dirichlet_alpha is not None:
            d["dirichlet_alpha"] = cfg.dirichlet_alpha
    return d


# --- YAML ---------------------------------------------------------------------


def _plain(node, path: str, lines: dict[str, int], loader) -> Any:
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = loader.construct_object(k, deep=True)
            sub = f"{path}.{key}" if path else str(key)
            if key in out:
                raise ConfigError(f"line {k.start_mark.line + 1}: duplicate key {key!r}")
            lines[sub] = k.start_mark.line + 1
            out[key] = _plain(v, sub, lines, loader)
            lines[sub] = k.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_plain(v, f"{path}[{i}]", lines, loader) for i, v in enumerate(node.value)]
    return loader.construct_object(node, deep=True)


def parse_yaml(text: str) -> tuple[dict, dict[str, int]]:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark else ""
        raise ConfigError(f"{where}invalid YAML: {getattr(exc, 'problem', exc)}") from exc
    if node is None:
        raise ConfigError("line 1: empty config")
    lines: dict[str, int] = {}
    data = _plain(node, "", lines, yaml.SafeLoader(""))
    if not isinstance(data, dict):
        raise ConfigError("line 1: config must be a mapping")
    return data, lines


def experiment_from_dict(d: dict, lines: dict[str, int] | None = None) -> ExperimentConfig:
    ctx = _Ctx(lines)
    ctx.mapping(d, "", EXPERIMENT_KEYS)
    kind = d.get("kind", "custom")
    if kind not in KINDS:
        ctx.fail("kind", f"must be one of {KINDS}, got {kind!r}")
    seeds_raw = d.get("seeds", [d.get("seed", 0)])
    if not isinstance(seeds_raw, list):
        seeds_raw = [seeds_raw]
    seeds = tuple(ctx.number(s, f"seeds[{k}]", integer=True, lo=0) for k, s in enumerate(seeds_raw))
    if not seeds:
        ctx.fail("seeds", "need at least one seed")
    out = d.get("out", "runs")
    if not isinstance(out, str):
        ctx.fail("out", "expected a path string")
    sim_dict = {k: v for k, v in d.items() if k in SIM_KEYS}
    sim_dict["seed"] = seeds[0]
    sim = config_from_dict(sim_dict, lines)
    task = sim.task
    if kind in ("regression_toy", "weak_node_toy") and task != "regression":
        ctx.fail("kind", f"{kind} needs polynomial agents")
    if kind == "classification_toy" and task != "classification":
        ctx.fail("kind", "classification_toy needs MLP agents")
    return ExperimentConfig(kind, sim, seeds, out, source=d)


def load_experiment(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text()
    data, lines = parse_yaml(text)
    return experiment_from_dict(data, lines)
