from __future__ import annotations

import json
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TypeVar

from pydantic import BaseModel, ValidationError

from ..config import AppConfig
from ..errors import UsageError
from ..idm import IdmSystem, StateStore
from ..netsim import AdversaryConfig, Network

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


def parse_crash_spec(text: str) -> tuple[int, int]:
    """``PID`` 或 ``PID@ROUND``：参与方从该轮起崩溃（默认第 0 轮）。"""
    pid_text, _, round_text = text.partition("@")
    try:
        pid = int(pid_text)
        crash_round = int(round_text) if round_text else 0
    except ValueError as exc:
        raise UsageError(f"--crash 格式应为 PID 或 PID@ROUND, 实际 {text!r}") from exc
    return pid, crash_round


def split_list(text: str | None) -> list[str]:
    if not text:
        return []
    return [part.strip() for part in text.split(",") if part.strip()]


def read_json(path: str | Path) -> Any:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"文件不存在: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} 不是合法的 JSON: {exc}") from exc


def read_input_model(path: str | Path, model_type: type[ModelT]) -> ModelT:
    try:
        return model_type.model_validate(read_json(path))
    except ValidationError as exc:
        first = exc.errors()[0]["msg"]
        raise UsageError(f"{path} 内容非法: {exc.error_count()} 处错误, 首个: {first}") from exc


@dataclass
class CliContext:
    """一次 CLI 调用共享的配置、状态目录与网络。"""

    config: AppConfig
    store: StateStore
    crash_schedule: dict[int, int] = field(default_factory=dict)
    transcript_path: Path | None = None
    networks: list[Network] = field(default_factory=list)

    @classmethod
    def build(
        cls,
        config: AppConfig,
        *,
        crashes: Iterable[str] = (),
        transcript: str | None = None,
    ) -> CliContext:
        schedule: dict[int, int] = {}
        for spec in crashes:
            pid, crash_round = parse_crash_spec(spec)
            schedule[pid] = crash_round
        return cls(
            config=config,
            store=StateStore(config.state_dir),
            crash_schedule=schedule,
            transcript_path=Path(transcript) if transcript else None,
        )

    def new_network(
        self,
        k: int,
        *,
        seed: int | None = None,
        corrupted: Iterable[int] = (),
    ) -> Network:
        adversary = AdversaryConfig(
            corrupted_parties=frozenset(corrupted),
            crash_schedule=dict(self.crash_schedule),
        )
        network = Network(
            k=k,
            seed=self.config.seed if seed is None else seed,
            adversary=adversary,
            parallel=self.config.network.parallel,
        )
        self.networks.append(network)
        return network

    def load_system(self) -> IdmSystem:
        params = self.store.load_public()
        return self.store.load_system(self.new_network(params.k), self.config.bundle)

    def export_transcripts(self) -> list[Path]:
        """导出本次调用的全部消息转写；多个网络时按序号加后缀。"""
        if self.transcript_path is None or not self.networks:
            return []
        if len(self.networks) == 1:
            return [self.networks[0].export_transcript(self.transcript_path)]
        base = self.transcript_path
        return [
            network.export_transcript(base.with_name(f"{base.stem}.{idx}{base.suffix}"))
            for idx, network in enumerate(self.networks, start=1)
        ]
