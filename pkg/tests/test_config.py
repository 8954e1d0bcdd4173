import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from predcons.config import (
    ConfigError, MlpAgent, PolyAgent, SimulationConfig, config_from_dict, config_to_dict,
    experiment_from_dict, load_experiment, parse_yaml,
)
from predcons.datagen import RegressionAgentSpec
from predcons.simulator import classification_toy_config, regression_toy_config
from predcons.trust import TrustScheme

BUNDLED = ("regression_toy", "weak_node", "classification_toy")

POLY_YAML = """\
kind: regression_toy
seeds: [3, 4]
rounds: 5
lambda: 1.0
trust:
  scheme: naive
agents:
  - {model: poly, degree: 4, x_mean: -2.0}
  - {model: poly, degree: 4, x_mean: 2.0}
"""


def bundled_path(name):
    from importlib import resources

    return resources.files("predcons") / "configs" / f"{name}.yaml"


def load_text(text):
    data, lines = parse_yaml(text)
    return experiment_from_dict(data, lines)


class TestParse:
    def test_minimal_document(self):
        exp = load_text(POLY_YAML)
        assert exp.kind == "regression_toy" and exp.seeds == (3, 4)
        sim = exp.simulation
        assert sim.rounds == 5 and sim.lam == 1.0 and sim.seed == 3
        assert sim.trust == TrustScheme("naive")
        assert [a.data.x_mean for a in sim.agents] == [-2.0, 2.0]

    @pytest.mark.parametrize("name", BUNDLED)
    def test_bundled_configs_load(self, name):
        exp = load_experiment(bundled_path(name))
        assert exp.seeds == (0, 1, 2, 3, 4)

    def test_bundled_a1_matches_builtin(self):
        exp = load_experiment(bundled_path("regression_toy"))
        assert exp.simulation == regression_toy_config(0).replace(consensus_threshold=0.2668)

    def test_bundled_classification_matches_builtin(self):
        exp = load_experiment(bundled_path("classification_toy"))
        for got, ref in zip(exp.simulation.agents, classification_toy_config(0).agents):
            assert got.mixture == pytest.approx(ref.mixture, abs=1e-15)
            assert (got.hidden, got.n, got.flip_fraction) == (ref.hidden, ref.n, ref.flip_fraction)
        assert [a.flip_fraction for a in exp.simulation.agents] == [0.1, 0.1, 0.1, 1.0]

    def test_scalar_seed(self):
        assert load_text(POLY_YAML.replace("seeds: [3, 4]", "seed: 7")).seeds == (7,)

    def test_numeric_strings_coerced(self):
        exp = load_text(POLY_YAML.replace("lambda: 1.0", "lambda: '1e-1'"))
        assert exp.simulation.lam == pytest.approx(0.1)

    def test_integral_float_accepted_for_int(self):
        assert load_text(POLY_YAML.replace("rounds: 5", "rounds: 5.0")).simulation.rounds == 5


class TestRejections:
    @pytest.mark.parametrize(
        "old,new,line,fragment",
        [
            ("rounds: 5", "rounds: 0", 3, "rounds"),
            ("rounds: 5", "rounds: 2.5", 3, "integer"),
            ("lambda: 1.0", "lambda: -1", 4, "lambda"),
            ("lambda: 1.0", "lambda: lots", 4, "number"),
            ("lambda: 1.0", "lamda: 1.0", 4, "unknown key"),
            ("  scheme: naive", "  scheme: clever", 6, "trust.scheme"),
            ("  scheme: naive", "  schema: naive", 6, "unknown key"),
            ("x_mean: 2.0}", "x_mean: 2.0, degre: 3}", 9, "unknown key"),
            ("kind: regression_toy", "kind: classification_toy", 1, "MLP"),
            ("seeds: [3, 4]", "seeds: [3, -1]", 2, "seeds[1]"),
        ],
    )
    def test_line_anchored(self, old, new, line, fragment):
        with pytest.raises(ConfigError) as info:
            load_text(POLY_YAML.replace(old, new))
        msg = str(info.value)
        assert msg.startswith(f"line {line}:") and fragment in msg

    def test_warmup_must_be_below_rounds(self):
        with pytest.raises(ConfigError, match="line 4: warmup_rounds"):
            load_text(POLY_YAML.replace("lambda: 1.0", "warmup_rounds: 5"))

    def test_bad_yaml_syntax(self):
        with pytest.raises(ConfigError, match="line"):
            load_text("rounds: [1, 2\nagents: x\n")

    def test_empty_and_non_mapping(self):
        with pytest.raises(ConfigError):
            load_text("")
        with pytest.raises(ConfigError):
            load_text("- 1\n- 2\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            load_text(POLY_YAML + "rounds: 3\n")

    def test_missing_agents(self):
        with pytest.raises(ConfigError, match="agents"):
            config_from_dict({"rounds": 3})

    def test_mixed_agents(self):
        with pytest.raises(ConfigError, match="all be"):
            config_from_dict({"agents": [{"model": "poly"}, {"model": "mlp", "mixture": [1, 0, 0, 0]}]})

    def test_mixture_must_sum_to_one(self):
        with pytest.raises(ConfigError, match="sum to 1"):
            config_from_dict({"agents": [{"model": "mlp", "mixture": [0.5, 0.1, 0.1, 0.1]}] * 2})

    def test_mixture_length(self):
        with pytest.raises(ConfigError, match="weights"):
            config_from_dict({"agents": [{"model": "mlp", "mixture": [0.5, 0.5]}] * 2})

    def test_flip_fraction_range(self):
        with pytest.raises(ConfigError, match="flip_fraction"):
            config_from_dict({"agents": [{"model": "mlp", "mixture": [1, 0, 0, 0], "flip_fraction": 1.5}] * 2})

    def test_boolean_is_not_number(self):
        with pytest.raises(ConfigError):
            config_from_dict({"agents": [{"model": "poly"}] * 2, "rounds": True})

    def test_confidence_flag_type(self):
        with pytest.raises(ConfigError, match="confidence_weighted"):
            config_from_dict({"agents": [{"model": "poly"}] * 2, "trust": {"confidence_weighted": "yes"}})

    def test_dataclass_validation(self):
        with pytest.raises(ConfigError):
            SimulationConfig(agents=(PolyAgent(2, RegressionAgentSpec(0.0)), MlpAgent((1, 0, 0, 0))))
        with pytest.raises(ConfigError):
            SimulationConfig(agents=(PolyAgent(2, RegressionAgentSpec(0.0)),) * 2, lam=-1.0)


class TestRoundTrip:
    @pytest.mark.parametrize("builder", [regression_toy_config, classification_toy_config])
    def test_dict_round_trip(self, builder):
        cfg = builder(5)
        assert config_from_dict(config_to_dict(cfg)) == cfg

    @pytest.mark.parametrize("builder", [regression_toy_config, classification_toy_config])
    def test_yaml_round_trip(self, builder):
        cfg = builder(2)
        text = yaml.safe_dump(config_to_dict(cfg))
        data, _ = parse_yaml(text)
        assert config_from_dict(data) == cfg

    @given(
        st.integers(2, 5),
        st.floats(0, 10, allow_nan=False),
        st.integers(1, 50),
        st.sampled_from(["naive", "static", "dynamic"]),
        st.integers(0, 2**31),
    )
    def test_random_poly_configs(self, n, lam, rounds, scheme, seed):
        agents = tuple(PolyAgent(int(k % 5), RegressionAgentSpec(float(k) - 1.0, 0.5, 10 + k)) for k in range(n))
        cfg = SimulationConfig(agents=agents, lam=lam, rounds=rounds, trust=TrustScheme(scheme), seed=seed)
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_replace_uses_dict_keys(self):
        cfg = regression_toy_config(0)
        new = cfg.replace(**{"lambda": 0.25, "trust": {"scheme": "dynamic"}})
        assert new.lam == 0.25 and new.trust.variant == "dynamic"
        assert new.agents == cfg.agents

    def test_float_coercion_in_agents(self):
        a = MlpAgent(np.array([0.7, 0.1, 0.1, 0.1]), [5, 10])
        assert a.mixture == (0.7, 0.1, 0.1, 0.1) and a.hidden == (5, 10)
        assert all(type(v) is float for v in a.mixture)
