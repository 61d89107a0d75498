import json
from fractions import Fraction
from pathlib import Path

import pytest

from nifldp.config import ConfigError, load_config, parse_config
from nifldp.learning import DiscreteLaplace, SparsifyTopK
from nifldp.privacy import DecompositionMode

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def minimal(**extra):
    doc = {
        "schema_version": 1,
        "scenario": {"kind": "custom", "initial_model": [0], "partitions": {"a": [{"id": "p", "value": 1}]}},
    }
    doc.update(extra)
    return doc


@pytest.mark.parametrize("name", ["two_clients.json", "decompose.json", "tight_pair.json", "moniteo.json"])
def test_shipped_configs_parse(name):
    load_config(CONFIGS / name)


def test_minimal_defaults():
    cfg = parse_config(minimal())
    assert cfg.mode == "exact" and cfg.state_ceiling == 10**6
    assert cfg.system.mech is None and cfg.system.cfg.exact
    assert cfg.decomposition_mode is DecompositionMode.ONE_CLIENT_DIFFERS


def test_exact_strings():
    cfg = parse_config(
        minimal(
            learning={"eta": "1/3", "grid": {"q": "1/4", "lo": "-1", "hi": "1"}},
            mechanism={"kind": "discrete_laplace", "t": "2/3", "clamp_steps": 2},
            defense={"kind": "sparsify_top_k", "k": 1},
        )
    )
    assert cfg.system.cfg.eta == Fraction(1, 3)
    assert cfg.system.mech == DiscreteLaplace(Fraction(2, 3), 2)
    assert cfg.system.defense == SparsifyTopK(1)


@pytest.mark.parametrize(
    "doc",
    [
        {"scenario": {"kind": "custom"}},
        minimal(schema_version=2),
        minimal(mode={"kind": "montecarlo"}),
        minimal(mode={"kind": "montecarlo", "samples": 0}),
        minimal(mechanism={"kind": "discrete_laplace", "t": "1/2", "clamp_steps": 1}),
        minimal(learning={"loss": "hinge"}),
        minimal(defense={"kind": "dropout"}),
        minimal(epsilon_budget=-1),
        {"schema_version": 1, "scenario": {"kind": "distributions", "d0": {"0": "1/2"}, "d1": {"0": 1}}},
        {"schema_version": 1, "scenario": {"kind": "distributions", "tight_pair": 1}},
        {"schema_version": 1, "scenario": {"kind": "weather"}},
        [],
    ],
)
def test_invalid(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


def test_neighbor_partitions_required():
    cfg = parse_config(minimal())
    with pytest.raises(ConfigError):
        cfg.neighbor_run()


def test_moniteo_overrides(tmp_path):
    doc = json.loads((CONFIGS / "moniteo.json").read_text())
    doc["scenario"]["n_satellites"] = 3
    cfg = parse_config(doc)
    assert cfg.moniteo.n_satellites == 3
    assert cfg.moniteo.mechanism == DiscreteLaplace(Fraction(3, 4), 2)
