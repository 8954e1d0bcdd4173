"""Round-based simulation of collaborative pseudo-labeling with trust weights.

Each round t:
  1. every agent predicts on the shared set with its round t-1 model;
  2. trust W(t) is resolved from those predictions (naive during warmup);
  3. agent i's pseudo-labels are row i of W(t) applied to all predictions;
  4. every agent refits on its local data plus lambda times the disagreement
     with its pseudo-labels (lambda is 0 during warmup).

Per-agent random streams come from :func:`predcons.rng.make_rng` keyed by
``(master_seed, purpose, agent[, round])``, so results do not depend on the order
in which agents are processed.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .config import MlpAgent, PolyAgent, SimulationConfig, config_from_dict, config_to_dict
from .datagen import (
    ClassificationSpec,
    CorruptionSpec,
    default_mixtures,
    dirichlet_partition,
    flip_labels,
    gen_cubic_regression,
    gen_gaussian_classes,
    gen_shared_grid,
    true_cubic,
)
from .errors import AgentError, InvalidInputError
from .models import (
    MlpModel,
    PolynomialModel,
    TrainConfig,
    mlp_train_collaborative,
    poly_fit_collaborative,
    predict,
)
from .rng import INIT, TRAIN, derive_seed, make_rng
from .trust import TrustMatrix, TrustScheme, compute_trust, naive_trust, resolve_trust


@dataclass(frozen=True)
class SimState:
    """Everything needed to run the next round. Models are replaced, never mutated."""

    task: str
    local_data: tuple[tuple[np.ndarray, np.ndarray], ...]
    shared_x: np.ndarray
    shared_truth: np.ndarray
    models: tuple
    round: int = 0
    static_cache: TrustMatrix | None = None

    @property
    def n_agents(self) -> int:
        return len(self.models)


@dataclass
class RoundRecord:
    round: int
    trust: np.ndarray
    predictions: np.ndarray
    pseudo_labels: np.ndarray
    disagreement: float
    metrics: list[dict[str, float]]
    collaborative: bool

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "trust": self.trust.tolist(),
            "predictions": self.predictions.tolist(),
            "pseudo_labels": self.pseudo_labels.tolist(),
            "disagreement": self.disagreement,
            "metrics": self.metrics,
            "collaborative": self.collaborative,
        }

    @classmethod
    def from_dict(cls, d: dict) -> RoundRecord:
        return cls(
            round=int(d["round"]),
            trust=np.asarray(d["trust"], dtype=np.float64),
            predictions=np.asarray(d["predictions"], dtype=np.float64),
            pseudo_labels=np.asarray(d["pseudo_labels"], dtype=np.float64),
            disagreement=float(d["disagreement"]),
            metrics=[{k: float(v) for k, v in m.items()} for m in d["metrics"]],
            collaborative=bool(d["collaborative"]),
        )


@dataclass
class History:
    config: SimulationConfig
    initial_predictions: np.ndarray
    initial_disagreement: float
    initial_metrics: list[dict[str, float]]
    records: list[RoundRecord] = field(default_factory=list)

    @property
    def consensus_time(self) -> int | None:
        """First collaborative round whose disagreement is below the configured threshold."""
        for rec in self.records:
            if rec.collaborative and rec.disagreement < self.config.consensus_threshold:
                return rec.round
        return None

    @property
    def final(self) -> RoundRecord:
        return self.records[-1]

    def trust_matrices(self, collaborative_only: bool = True) -> list[np.ndarray]:
        return [r.trust for r in self.records if r.collaborative or not collaborative_only]

    def to_dict(self) -> dict:
        return {
            "config": config_to_dict(self.config),
            "initial_predictions": self.initial_predictions.tolist(),
            "initial_disagreement": self.initial_disagreement,
            "initial_metrics": self.initial_metrics,
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, d: dict) -> History:
        return cls(
            config=config_from_dict(d["config"]),
            initial_predictions=np.asarray(d["initial_predictions"], dtype=np.float64),
            initial_disagreement=float(d["initial_disagreement"]),
            initial_metrics=[{k: float(v) for k, v in m.items()} for m in d["initial_metrics"]],
            records=[RoundRecord.from_dict(r) for r in d["records"]],
        )


# --- metrics ------------------------------------------------------------------


def disagreement(preds) -> float:
    """Max over agent pairs of RMS difference (regression) or mean total variation (classification)."""
    preds = np.asarray(preds, dtype=np.float64)
    n = preds.shape[0]
    worst = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d = preds[i] - preds[j]
            if preds.ndim == 2:
                val = float(np.sqrt(np.mean(d**2)))
            else:
                val = float(np.mean(0.5 * np.abs(d).sum(axis=-1)))
            worst = max(worst, val)
    return worst


def evaluate(model, eval_inputs, eval_labels, kind: str) -> dict[str, float]:
    """MSE for regression; accuracy and balanced accuracy (mean per-class recall) for classification."""
    labels = np.asarray(eval_labels)
    if labels.size == 0:
        raise InvalidInputError("evaluation set is empty")
    out = predict(model, eval_inputs)
    return metrics_from_predictions(out, labels, kind)


def metrics_from_predictions(preds, labels, kind: str) -> dict[str, float]:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if labels.size == 0:
        raise InvalidInputError("evaluation set is empty")
    if kind == "regression":
        return {"mse": float(np.mean((preds - labels) ** 2))}
    if kind != "classification":
        raise InvalidInputError(f"unknown task kind {kind!r}")
    hard = preds.argmax(axis=-1) if preds.ndim == 2 else preds
    correct = hard == labels
    recalls = [correct[labels == c].mean() for c in np.unique(labels)]
    return {"accuracy": float(correct.mean()), "balanced_accuracy": float(np.mean(recalls))}


# --- simulation ---------------------------------------------------------------


def _train_config(config: SimulationConfig, lam: float, epochs: int, seed: int) -> TrainConfig:
    return TrainConfig(
        lam=lam,
        learning_rate=config.learning_rate,
        local_epochs=epochs,
        batch_size_local=config.batch_size_local,
        batch_size_shared=config.batch_size_shared,
        seed=seed,
    )


def _classification_data(config: SimulationConfig):
    n_agents = config.n_agents
    n_cls = len(config.class_means)
    if config.dirichlet_alpha is None:
        mixtures = tuple(tuple(a.mixture) for a in config.agents)
    else:
        mixtures = tuple(map(tuple, np.full((n_agents, n_cls), 1.0 / n_cls)))
    spec = ClassificationSpec(
        mixtures=mixtures,
        n_per_client=tuple(a.n for a in config.agents),
        n_shared_per_class=config.n_shared_per_class,
        class_means=config.class_means,
    )
    data = gen_gaussian_classes(spec, config.seed)
    clients = data.clients
    if config.dirichlet_alpha is not None:
        pool_x = np.concatenate([c[0] for c in clients])
        pool_y = np.concatenate([c[1] for c in clients])
        clients = dirichlet_partition(pool_x, pool_y, n_agents, config.dirichlet_alpha, config.seed)
    local = []
    for i, (agent, (x, y)) in enumerate(zip(config.agents, clients)):
        y = flip_labels(y, CorruptionSpec(agent.flip_fraction, derive_seed(config.seed, i)), n_cls)
        local.append((x, y))
    return local, data.shared_x, data.shared_y


def initialize_agents(config: SimulationConfig) -> SimState:
    """Generate every agent's data and fit its model on local data only."""
    if not config.agents:
        raise InvalidInputError("no agents configured")
    if config.task == "regression":
        local = []
        models = []
        for i, agent in enumerate(config.agents):
            x, y = gen_cubic_regression(agent.data, derive_seed(config.seed, i))
            local.append((x, y))
            try:
                models.append(poly_fit_collaborative(x, y, None, None, agent.degree, 0.0))
            except Exception as exc:
                raise AgentError(i, exc) from exc
        shared_x = gen_shared_grid(config.shared_lo, config.shared_hi, config.shared_n)
        return SimState("regression", tuple(local), shared_x, true_cubic(shared_x), tuple(models))

    local, shared_x, shared_y = _classification_data(config)
    n_cls = len(config.class_means)
    models = []
    for i, (agent, (x, y)) in enumerate(zip(config.agents, local)):
        sizes = (len(config.class_means[0]), *agent.hidden, n_cls)
        model = MlpModel.initialize(sizes, make_rng(config.seed, INIT, i))
        tc = _train_config(config, 0.0, config.init_epochs, derive_seed(config.seed, TRAIN, i, 0))
        try:
            models.append(mlp_train_collaborative(model, x, y, None, None, tc))
        except Exception as exc:
            raise AgentError(i, exc) from exc
    return SimState("classification", tuple(local), shared_x, shared_y, tuple(models))


def shared_predictions(state: SimState) -> np.ndarray:
    return np.stack([predict(m, state.shared_x) for m in state.models])


def form_pseudo_labels(trust, preds) -> np.ndarray:
    """Row i is sum_j w_ij * preds_j (works for (N, n_S) and (N, n_S, C) predictions)."""
    w = trust.matrix if isinstance(trust, TrustMatrix) else np.asarray(trust, dtype=np.float64)
    preds = np.asarray(preds, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[1] != preds.shape[0]:
        raise InvalidInputError(f"trust shape {w.shape} does not match {preds.shape[0]} agents")
    return np.tensordot(w, preds, axes=(1, 0))


def _update_agent(i: int, state: SimState, config: SimulationConfig, pseudo_i, lam: float, t: int):
    x, y = state.local_data[i]
    model = state.models[i]
    agent = config.agents[i]
    try:
        if isinstance(agent, PolyAgent):
            return poly_fit_collaborative(x, y, state.shared_x, pseudo_i, agent.degree, lam)
        tc = _train_config(config, lam, config.local_epochs, derive_seed(config.seed, TRAIN, i, t))
        return mlp_train_collaborative(model, x, y, state.shared_x, pseudo_i, tc)
    except Exception as exc:
        raise AgentError(i, exc) from exc


def run_round(state: SimState, config: SimulationConfig, t: int) -> tuple[SimState, RoundRecord]:
    """One global round; trust and pseudo-labels use only round t-1 models."""
    if t < 1:
        raise InvalidInputError("rounds are numbered from 1")
    preds = shared_predictions(state)
    n = state.n_agents
    cache = state.static_cache
    if t <= config.warmup_rounds:
        trust = naive_trust(n, t, config.trust)
        lam = 0.0
    else:
        trust = resolve_trust(config.trust, t, preds, cache, first_round=config.warmup_rounds + 1)
        if config.trust.variant == "static" and cache is None:
            cache = trust
        lam = config.lam
    pseudo = form_pseudo_labels(trust, preds)
    models = tuple(_update_agent(i, state, config, pseudo[i], lam, t) for i in range(n))
    new_state = replace(state, models=models, round=t, static_cache=cache)
    new_preds = shared_predictions(new_state)
    metrics = [metrics_from_predictions(p, state.shared_truth, state.task) for p in new_preds]
    record = RoundRecord(
        round=t,
        trust=np.array(trust.matrix),
        predictions=new_preds,
        pseudo_labels=pseudo,
        disagreement=disagreement(new_preds),
        metrics=metrics,
        collaborative=t > config.warmup_rounds,
    )
    return new_state, record


def run_simulation(
    config: SimulationConfig,
    on_round: Callable[[SimState, RoundRecord], None] | None = None,
    on_start: Callable[[SimState, History], None] | None = None,
) -> History:
    """Initialize, then run rounds 1..T (the first ``warmup_rounds`` with lambda = 0).

    ``on_start`` sees the initialized state and the empty history; ``on_round`` sees
    each round's new state and record as soon as the round completes.
    """
    state = initialize_agents(config)
    preds0 = shared_predictions(state)
    history = History(
        config=config,
        initial_predictions=preds0,
        initial_disagreement=disagreement(preds0),
        initial_metrics=[metrics_from_predictions(p, state.shared_truth, state.task) for p in preds0],
    )
    if on_start is not None:
        on_start(state, history)
    for t in range(1, config.rounds + 1):
        state, record = run_round(state, config, t)
        history.records.append(record)
        if on_round is not None:
            on_round(state, record)
    return history


# --- idealized dynamics -------------------------------------------------------


def idealized_markov_evolution(initial_preds, trust_sequence: Sequence) -> list[np.ndarray]:
    """Pure evolution ``Psi(t) = W(t) Psi(t-1)`` with no model fitting; returns Psi(0..T)."""
    psi = np.asarray(initial_preds, dtype=np.float64)
    out = [psi]
    for w in trust_sequence:
        w = w.matrix if isinstance(w, TrustMatrix) else np.asarray(w, dtype=np.float64)
        if w.shape != (psi.shape[0], psi.shape[0]):
            raise InvalidInputError(f"trust shape {w.shape} does not match {psi.shape[0]} agents")
        psi = np.tensordot(w, psi, axes=(1, 0))
        out.append(psi)
    return out


def idealized_trust_dynamics(initial_preds, scheme: TrustScheme, rounds: int):
    """Recompute trust from the current predictions each step, then apply it.

    Stands in for perfectly fitting models: every agent's new predictions equal its
    pseudo-labels. Returns ``(trust_matrices, predictions)`` with predictions Psi(0..T).
    """
    psi = np.asarray(initial_preds, dtype=np.float64)
    trusts, states = [], [psi]
    for t in range(1, rounds + 1):
        w = compute_trust(psi, scheme, t)
        psi = form_pseudo_labels(w, psi)
        if psi.ndim == 3:
            # keep rows on the simplex despite rounding
            psi = psi / psi.sum(axis=-1, keepdims=True)
        trusts.append(w.matrix)
        states.append(psi)
    return trusts, states


# --- presets ------------------------------------------------------------------


def regression_toy_config(seed: int = 0, rounds: int = 20, lam: float = 1.0, scheme: str = "naive") -> SimulationConfig:
    """Three degree-4 agents around x = -2, 0, 2; shared grid of 50 points on [-4, 4]."""
    from .datagen import RegressionAgentSpec

    agents = tuple(PolyAgent(4, RegressionAgentSpec(m, 1.0, 50, 1.0)) for m in (-2.0, 0.0, 2.0))
    return SimulationConfig(agents=agents, rounds=rounds, lam=lam, trust=TrustScheme(scheme), seed=seed)


def weak_node_toy_config(seed: int = 0, rounds: int = 50, lam: float = 1.0, scheme: str = "dynamic") -> SimulationConfig:
    """Three degree-4 agents plus one degree-1 agent at x = 3; shared grid on [-4, 6]."""
    from .datagen import RegressionAgentSpec

    agents = tuple(PolyAgent(4, RegressionAgentSpec(m, 1.0, 50, 1.0)) for m in (-2.0, 0.0, 2.0))
    agents += (PolyAgent(1, RegressionAgentSpec(3.0, 1.0, 50, 1.0)),)
    return SimulationConfig(
        agents=agents, rounds=rounds, lam=lam, trust=TrustScheme(scheme), seed=seed, shared_lo=-4.0, shared_hi=6.0
    )


def classification_toy_config(
    seed: int = 0,
    scheme: str = "dynamic",
    rounds: int = 30,
    warmup: int = 5,
    lam: float = 0.5,
) -> SimulationConfig:
    """Four 2-5-10-4 MLP clients; clients 0-2 have 10% flipped labels, client 3 all flipped."""
    mix = default_mixtures(4)
    flips = (0.1, 0.1, 0.1, 1.0)
    agents = tuple(MlpAgent(tuple(mix[c]), (5, 10), 200, flips[c]) for c in range(4))
    return SimulationConfig(
        agents=agents, rounds=rounds, warmup_rounds=warmup, lam=lam, trust=TrustScheme(scheme), seed=seed,
        n_shared_per_class=50,
    )
