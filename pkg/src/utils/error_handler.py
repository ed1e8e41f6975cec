"""错误处理系统

提供统一的错误类型层次和错误处理接口。
"""

import sys
import traceback
from typing import Any, Dict, Optional


class NVLabError(Exception):
    """数值实验室异常基类

    每个子类带有稳定的 code 字符串，用于输出文件中的 reason 字段和退出码映射。
    """
    code = "NVLAB"

    def __init__(self, message: str, detail: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.detail = detail or {}


class PreconditionError(NVLabError):
    """操作前置条件不满足"""
    code = "PRECONDITION"


class NonConvergedError(NVLabError):
    """振荡积分稳定化或拟合未收敛"""
    code = "NON_CONVERGED"


class NaNDetectedError(NVLabError):
    """演化过程中出现非有限值

    state 保存最后一个有限状态，便于在爆破实验附近继续分析。
    """
    code = "NAN_DETECTED"

    def __init__(self, message: str, state: Any = None, time: float = None,
                 detail: Optional[Dict[str, Any]] = None):
        super().__init__(message, detail)
        self.state = state
        self.time = time


class ResolutionError(NVLabError):
    """谱尾检查失败（网格分辨率不足）"""
    code = "RESOLUTION"


class ConfigError(NVLabError):
    """配置文档非法"""
    code = "CONFIG"


class UsageError(NVLabError):
    """命令行用法错误"""
    code = "USAGE"


class ToleranceError(NVLabError):
    """检查结果超出容差"""
    code = "TOLERANCE"


# 退出码：2 表示数值失败（未收敛/超差/NaN），1 表示用法或输入错误
_EXIT_CODES = {
    NonConvergedError: 2,
    ToleranceError: 2,
    NaNDetectedError: 2,
    UsageError: 1,
    ConfigError: 1,
    PreconditionError: 1,
    ResolutionError: 1,
}


class ErrorHandler:
    """错误处理器

    收集运行过程中的错误和警告，并把异常映射为退出码。
    """

    def __init__(self):
        """初始化错误处理器"""
        self.errors = []
        self.warnings = []

    def add_error(self, error_type: str, message: str, context: str = None) -> None:
        """添加一个错误记录

        参数:
            error_type: 错误类型（如 'NON_CONVERGED', 'CONFIG' 等）
            message: 错误消息
            context: 出错的子命令或判据名称（可选）

        返回:
            None
        """
        self.errors.append({
            'type': error_type,
            'message': message,
            'context': context,
        })

    def add_warning(self, message: str, context: str = None) -> None:
        """添加一个警告记录

        参数:
            message: 警告消息
            context: 相关的子命令或判据名称（可选）

        返回:
            None
        """
        self.warnings.append({
            'message': message,
            'context': context,
        })

    def handle_error(self, error: Exception) -> int:
        """处理异常对象

        参数:
            error: 异常对象

        返回:
            对应的退出码

        说明:
            领域异常只打印类型和代码；其他异常打印完整堆栈。
        """
        print(f"ERROR: {error}", file=sys.stderr)
        if isinstance(error, NVLabError):
            print(f"Type: {type(error).__name__} ({error.code})", file=sys.stderr)
            self.add_error(error.code, str(error))
        else:
            traceback.print_exc(file=sys.stderr)
            self.add_error(type(error).__name__, str(error))
        return self.exit_code_for(error)

    @staticmethod
    def exit_code_for(error: Exception) -> int:
        """把异常映射为退出码

        参数:
            error: 异常对象

        返回:
            0/1/2 退出码
        """
        for cls, code in _EXIT_CODES.items():
            if isinstance(error, cls):
                return code
        return 1

    def has_errors(self) -> bool:
        """检查是否有错误"""
        return len(self.errors) > 0

    def get_error_count(self) -> int:
        """获取错误数量"""
        return len(self.errors)

    def get_warning_count(self) -> int:
        """获取警告数量"""
        return len(self.warnings)

    def print_errors(self) -> None:
        """打印所有错误

        返回:
            None
        """
        if not self.errors:
            print("No errors.")
            return

        print(f"\nTotal {len(self.errors)} error(s):\n")
        for i, error in enumerate(self.errors, 1):
            where = f" in {error['context']}" if error['context'] else ""
            print(f"{i}. [{error['type']}] {error['message']}{where}")

    def print_warnings(self) -> None:
        """打印所有警告

        返回:
            None
        """
        if not self.warnings:
            print("No warnings.")
            return

        print(f"\nTotal {len(self.warnings)} warning(s):\n")
        for i, warning in enumerate(self.warnings, 1):
            where = f" in {warning['context']}" if warning['context'] else ""
            print(f"{i}. {warning['message']}{where}")

    def reset(self) -> None:
        """重置所有错误和警告"""
        self.errors = []
        self.warnings = []
