from __future__ import annotations

import argparse
import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, NamedTuple

if TYPE_CHECKING:
    from .context import CliContext

logger = logging.getLogger(__name__)


@dataclass
class CommandResult:
    """子命令的输出：stdout 上的 JSON 负载与退出码。"""

    payload: dict[str, Any] = field(default_factory=dict)
    exit_code: int = 0


class CliCommand(NamedTuple):
    """子命令定义。"""

    name: str
    help: str
    configure: Callable[[argparse.ArgumentParser], None]
    run: Callable[[CliContext, argparse.Namespace], CommandResult]


# 全局命令表，按注册顺序出现在 --help 中
_COMMANDS: dict[str, CliCommand] = {}


def _no_options(parser: argparse.ArgumentParser) -> None:
    return None


def command(name: str, help: str):
    """注册子命令的装饰器。

    被装饰的类提供静态方法 ``run(ctx, args)``，可选 ``configure(parser)`` 声明参数。
    """

    def decorator(obj):
        if name in _COMMANDS:
            raise ValueError(f"子命令重复注册: {name}")
        run = getattr(obj, "run", None)
        if run is None:
            raise TypeError(f"{obj.__name__} 缺少 run(ctx, args)")
        configure = getattr(obj, "configure", None) or _no_options

        _COMMANDS[name] = CliCommand(name=name, help=help, configure=configure, run=run)
        logger.debug("已注册子命令: %s (%s)", name, obj.__name__)
        return obj

    return decorator


def get_command(name: str) -> CliCommand | None:
    return _COMMANDS.get(name)


def all_commands() -> list[CliCommand]:
    return list(_COMMANDS.values())
