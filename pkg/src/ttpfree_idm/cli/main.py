from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from typing import Any

from ..canonical import canonical_text
from ..config import AppConfig, load_config
from ..errors import ConfigError, IdmError
from .context import CliContext
from .registry import all_commands, get_command

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s - %(message)s"


def _add_global_options(parser: argparse.ArgumentParser, *, nested: bool) -> None:
    # 子命令上的同名参数默认 SUPPRESS，避免覆盖写在子命令之前的值
    def default(value: Any) -> Any:
        return argparse.SUPPRESS if nested else value

    parser.add_argument("--state", default=default(None), help="状态目录（覆盖配置中的 state_dir）")
    parser.add_argument("--config", default=default(None), help="YAML / JSON 配置文件路径")
    parser.add_argument("--seed", type=int, default=default(None), help="确定性随机种子")
    parser.add_argument("--transcript", default=default(None), help="把消息转写导出为 JSON Lines")
    parser.add_argument("--parallel", action="store_true", default=default(False), help="同一轮内并发推进参与方")
    parser.add_argument(
        "--crash",
        action="append",
        default=default(None),
        metavar="PID[@ROUND]",
        help="让参与方从某轮起崩溃，可重复",
    )
    parser.add_argument("-v", "--verbose", action="store_true", default=default(False), help="输出 DEBUG 日志")
    parser.add_argument("-q", "--quiet", action="store_true", default=default(False), help="只输出 WARNING 以上日志")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttpfree-idm", description="无可信第三方的云身份管理模拟器")
    _add_global_options(parser, nested=False)
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for cmd in all_commands():
        sub = subparsers.add_parser(cmd.name, help=cmd.help, description=cmd.help)
        _add_global_options(sub, nested=True)
        cmd.configure(sub)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _emit(payload: dict[str, Any]) -> None:
    sys.stdout.write(canonical_text(payload) + "\n")
    sys.stdout.flush()


def _build_context(args: argparse.Namespace) -> CliContext:
    config = load_config(args.config) if args.config else AppConfig()
    config = config.with_overrides(
        state_dir=args.state,
        seed=args.seed,
        parties=getattr(args, "parties", None),
        parallel=True if args.parallel else None,
    )
    return CliContext.build(config, crashes=args.crash or (), transcript=args.transcript)


def main(argv: Sequence[str] | None = None) -> int:
    """执行一个子命令：stdout 只输出一行规范化 JSON，诊断信息写 stderr。

    退出码：0 成功；1 拒绝类结论；2 用法 / 配置错误；3 内部错误。
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    _configure_logging(args)
    cmd = get_command(args.command)
    assert cmd is not None

    ctx: CliContext | None = None
    try:
        ctx = _build_context(args)
        result = cmd.run(ctx, args)
    except (IdmError, ConfigError) as exc:
        logger.error("%s: %s", exc.verdict, str(exc).replace("\n", " "))
        _emit({"verdict": exc.verdict, "error": str(exc)})
        return exc.exit_code
    except FileNotFoundError as exc:
        logger.error("UsageError: %s", exc)
        _emit({"verdict": "UsageError", "error": str(exc)})
        return 2
    except Exception as exc:
        logger.exception("内部错误: %s", exc)
        _emit({"verdict": "InternalError", "error": str(exc)})
        return 3
    finally:
        if ctx is not None:
            try:
                ctx.export_transcripts()
            except OSError as exc:
                logger.warning("转写导出失败 (非致命): %s", exc)

    _emit(result.payload)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
