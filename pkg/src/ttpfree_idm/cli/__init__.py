"""命令行入口。导入 commands 即完成全部子命令注册。"""

from . import commands as commands
from .main import build_parser, main
from .registry import CliCommand, CommandResult, all_commands, command, get_command

__all__ = ["CliCommand", "CommandResult", "all_commands", "build_parser", "command", "get_command", "main"]
