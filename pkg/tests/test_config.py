from pathlib import Path
from textwrap import dedent

import pytest

from ttpfree_idm.config import config_from_mapping, load_config
from ttpfree_idm.errors import ConfigError


def _write(tmp_path: Path, text: str) -> Path:
    config_path = tmp_path / "config.yaml"
    config_path.write_text(dedent(text).strip(), encoding="utf-8")
    return config_path


def test_load_config_defaults(tmp_path: Path) -> None:
    config = load_config(_write(tmp_path, "seed: 4"))

    assert config.parties == 3
    assert config.seed == 4
    assert config.state_dir == Path("state")
    assert config.keygen.k == 3
    assert config.keygen.biprimality_rounds == 40
    assert config.bundle.apoptosis_threshold == 0.3
    assert config.network.parallel is False
    assert config.effective_rank_policy().thresholds == {"regular": 2, "senior": 2}


def test_load_config_full_example(tmp_path: Path) -> None:
    config_path = _write(
        tmp_path,
        """
        state_dir: "run/state"
        parties: 5
        keygen:
          prime_share_bits: 12
          biprimality_rounds: 20
        rank_policy:
          thresholds:
            regular: 2
            senior: 4
          ordering: ["regular", "senior"]
          sso_ranks: ["senior"]
          operation_levels:
            transfer: 2
        sensitivity:
          ssn: 0.9
        bundle:
          apoptosis_threshold: 0.2
        network:
          parallel: true
        """,
    )

    config = load_config(config_path)

    assert config.state_dir == Path("run/state")
    assert config.keygen.k == 5
    assert config.keygen.prime_share_bits == 12
    assert config.rank_policy is not None
    assert config.rank_policy.threshold_for("regular", 5, "transfer") == 4
    assert config.rank_policy.sso_ranks == ("senior",)
    assert config.bundle.sensitivity_of("ssn") == 0.9
    assert config.bundle.apoptosis_threshold == 0.2
    assert config.network.parallel is True


def test_missing_config_file(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.yaml")


@pytest.mark.parametrize(
    "raw",
    [
        {"parties": 2},
        {"colour": "blue"},
        {"keygen": {"public_exponent": 4}},
        {"keygen": {"unknown": 1}},
        {"rank_policy": {"thresholds": {"regular": 1}}},
        {"rank_policy": {"ordering": ["regular"]}},
        {"bundle": {"apoptosis_threshold": 0.9, "evaporation_threshold": 0.5}},
        {"sensitivity": {"ssn": 1.5}},
        {"network": "fast"},
    ],
)
def test_invalid_config_raises(raw: dict) -> None:
    with pytest.raises(ConfigError):
        config_from_mapping(raw)


def test_overrides_rebuild_keygen_for_new_party_count() -> None:
    config = config_from_mapping({"keygen": {"prime_share_bits": 12}})

    overridden = config.with_overrides(parties=5, seed=9, state_dir="elsewhere", parallel=True)

    assert overridden.keygen.k == 5
    assert overridden.keygen.prime_share_bits == 12
    assert overridden.seed == 9
    assert overridden.state_dir == Path("elsewhere")
    assert overridden.network.parallel is True
    assert config.keygen.k == 3


def test_overrides_revalidate_rank_policy() -> None:
    config = config_from_mapping({"parties": 4, "rank_policy": {"thresholds": {"regular": 4}}})

    with pytest.raises(ConfigError):
        config.with_overrides(parties=3)
