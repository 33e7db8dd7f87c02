from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from .bundle import BundlePolicy
from .dkg import KeygenConfig
from .errors import ConfigError
from .idm import RankPolicy

_TOP_LEVEL_KEYS = {"state_dir", "parties", "seed", "keygen", "rank_policy", "sensitivity", "bundle", "network"}
_KEYGEN_KEYS = {
    "prime_share_bits",
    "trial_division_bound",
    "biprimality_rounds",
    "public_exponent",
    "bgw_prime",
    "max_attempts",
    "batch_size",
    "backup_threshold",
}
_RANK_POLICY_KEYS = {"thresholds", "ordering", "default_rank", "sso_ranks", "operation_levels"}
_BUNDLE_KEYS = {"apoptosis_threshold", "evaporation_threshold", "default_sensitivity"}
_NETWORK_KEYS = {"parallel"}


@dataclass
class NetworkConfig:
    # 同一轮内是否并发推进各参与方（结果与串行逐字节一致）
    parallel: bool = False


@dataclass
class AppConfig:
    state_dir: Path = Path("state")
    parties: int = 3
    seed: int = 0
    keygen: KeygenConfig = field(default_factory=KeygenConfig)
    rank_policy: RankPolicy | None = None
    bundle: BundlePolicy = field(default_factory=BundlePolicy)
    network: NetworkConfig = field(default_factory=NetworkConfig)

    def effective_rank_policy(self) -> RankPolicy:
        policy = self.rank_policy or RankPolicy.default_for(self.parties)
        return policy.validate_for(self.parties)

    def with_overrides(
        self,
        *,
        state_dir: str | Path | None = None,
        seed: int | None = None,
        parties: int | None = None,
        parallel: bool | None = None,
    ) -> AppConfig:
        """命令行参数覆盖配置文件中的值。"""
        cfg = AppConfig(
            state_dir=Path(state_dir) if state_dir is not None else self.state_dir,
            parties=parties if parties is not None else self.parties,
            seed=seed if seed is not None else self.seed,
            keygen=self.keygen,
            rank_policy=self.rank_policy,
            bundle=self.bundle,
            network=NetworkConfig(parallel=parallel if parallel is not None else self.network.parallel),
        )
        if cfg.keygen.k != cfg.parties:
            cfg.keygen = _build_keygen_config(_keygen_as_dict(self.keygen), cfg.parties)
        cfg.effective_rank_policy()
        return cfg


def _require(mapping: dict[str, Any], key: str) -> Any:
    if key not in mapping or mapping[key] in ("", None):
        raise ConfigError(f"配置缺少必填字段: {key}")
    return mapping[key]


def _reject_unknown(mapping: dict[str, Any], allowed: set[str], section: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"配置非法: {section} 中存在未知字段 {unknown}")


def _section(raw: dict[str, Any], key: str) -> dict[str, Any]:
    value = raw.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"配置非法: {key} 必须是映射")
    return value


def _keygen_as_dict(cfg: KeygenConfig) -> dict[str, Any]:
    return {key: getattr(cfg, key) for key in _KEYGEN_KEYS}


def _build_keygen_config(keygen_raw: dict[str, Any], parties: int) -> KeygenConfig:
    _reject_unknown(keygen_raw, _KEYGEN_KEYS, "keygen")
    defaults = KeygenConfig()
    bgw_prime = keygen_raw.get("bgw_prime")
    backup_threshold = keygen_raw.get("backup_threshold")
    return KeygenConfig(
        k=parties,
        prime_share_bits=int(keygen_raw.get("prime_share_bits", defaults.prime_share_bits)),
        trial_division_bound=int(keygen_raw.get("trial_division_bound", defaults.trial_division_bound)),
        biprimality_rounds=int(keygen_raw.get("biprimality_rounds", defaults.biprimality_rounds)),
        public_exponent=int(keygen_raw.get("public_exponent", defaults.public_exponent)),
        bgw_prime=int(bgw_prime) if bgw_prime is not None else None,
        max_attempts=int(keygen_raw.get("max_attempts", defaults.max_attempts)),
        batch_size=int(keygen_raw.get("batch_size", defaults.batch_size)),
        backup_threshold=int(backup_threshold) if backup_threshold is not None else None,
    )


def _build_rank_policy(policy_raw: dict[str, Any], parties: int) -> RankPolicy | None:
    if not policy_raw:
        return None
    _reject_unknown(policy_raw, _RANK_POLICY_KEYS, "rank_policy")
    thresholds = _require(policy_raw, "thresholds")
    sso_ranks = policy_raw.get("sso_ranks")
    try:
        policy = RankPolicy(
            thresholds={str(k): int(v) for k, v in thresholds.items()},
            ordering=tuple(policy_raw.get("ordering") or ()),
            default_rank=policy_raw.get("default_rank"),
            sso_ranks=tuple(sso_ranks) if sso_ranks is not None else None,
            operation_levels={str(k): int(v) for k, v in (policy_raw.get("operation_levels") or {}).items()},
        )
    except ValidationError as exc:
        raise ConfigError(f"配置非法: rank_policy: {exc}") from exc
    return policy.validate_for(parties)


def _build_bundle_policy(bundle_raw: dict[str, Any], sensitivity_raw: dict[str, Any]) -> BundlePolicy:
    _reject_unknown(bundle_raw, _BUNDLE_KEYS, "bundle")
    try:
        return BundlePolicy(
            apoptosis_threshold=float(bundle_raw.get("apoptosis_threshold", 0.3)),
            evaporation_threshold=float(bundle_raw.get("evaporation_threshold", 0.8)),
            default_sensitivity=float(bundle_raw.get("default_sensitivity", 1.0)),
            sensitivity={str(k): float(v) for k, v in sensitivity_raw.items()},
        )
    except ValidationError as exc:
        raise ConfigError(f"配置非法: bundle / sensitivity: {exc}") from exc


def config_from_mapping(raw: dict[str, Any]) -> AppConfig:
    _reject_unknown(raw, _TOP_LEVEL_KEYS, "顶层")

    parties = int(raw.get("parties", 3))
    if parties < 3:
        raise ConfigError(f"配置非法: parties 必须 >= 3, 实际 {parties}")

    network_raw = _section(raw, "network")
    _reject_unknown(network_raw, _NETWORK_KEYS, "network")

    return AppConfig(
        state_dir=Path(raw.get("state_dir") or "state"),
        parties=parties,
        seed=int(raw.get("seed", 0)),
        keygen=_build_keygen_config(_section(raw, "keygen"), parties),
        rank_policy=_build_rank_policy(_section(raw, "rank_policy"), parties),
        bundle=_build_bundle_policy(_section(raw, "bundle"), _section(raw, "sensitivity")),
        network=NetworkConfig(parallel=bool(network_raw.get("parallel", False))),
    )


def load_config(path: str | Path) -> AppConfig:
    """读取 YAML 配置（JSON 是 YAML 子集，同样可用）。"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"配置文件不存在: {path}")

    with path.open("r", encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"配置非法: {path} 顶层必须是映射")
    return config_from_mapping(raw)
