"""日志系统

提供统一的日志输出接口。数据文件从不写入日志内容，日志只面向终端。
"""

import sys
from datetime import datetime
from typing import Any


class Logger:
    """日志记录器

    提供不同级别的日志输出（INFO, SUCCESS, WARNING, ERROR, DEBUG），
    以及 suite/sweep 使用的分节摘要输出。
    """

    RULE = "=" * 70

    def __init__(self, verbose: bool = False, quiet: bool = False):
        """初始化日志记录器

        参数:
            verbose: 是否输出 DEBUG 信息
            quiet: 是否抑制 INFO/SUCCESS（警告和错误始终输出）
        """
        self.verbose = verbose
        self.quiet = quiet
        self.start_time = datetime.now()

    def _format_message(self, level: str, message: str) -> str:
        timestamp = datetime.now().strftime("%H:%M:%S")
        return f"[{timestamp}] [{level}] {message}"

    def info(self, message: str) -> None:
        """输出信息级别日志"""
        if not self.quiet:
            print(self._format_message("INFO", message), file=sys.stdout)

    def success(self, message: str) -> None:
        """输出成功级别日志"""
        if not self.quiet:
            print(self._format_message("SUCCESS", message), file=sys.stdout)

    def warning(self, message: str) -> None:
        """输出警告级别日志（stderr）"""
        print(self._format_message("WARNING", message), file=sys.stderr)

    def error(self, message: str) -> None:
        """输出错误级别日志（stderr）"""
        print(self._format_message("ERROR", message), file=sys.stderr)

    def debug(self, message: str) -> None:
        """输出调试级别日志，仅在 verbose 模式下生效"""
        if self.verbose:
            print(self._format_message("DEBUG", message), file=sys.stdout)

    def section(self, title: str) -> None:
        """输出分节标题

        参数:
            title: 标题文字

        说明:
            与批处理摘要相同的 "=" * 70 框线格式。
        """
        self.info(self.RULE)
        self.info(title)
        self.info(self.RULE)

    def field(self, name: str, value: Any, width: int = 18) -> None:
        """输出一行对齐的 名称: 值"""
        self.info(f"{(name + ':').ljust(width)}{value}")

    def elapsed(self) -> float:
        """返回自创建以来经过的秒数"""
        return (datetime.now() - self.start_time).total_seconds()
