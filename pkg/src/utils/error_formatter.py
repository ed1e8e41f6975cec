"""判据报告格式化器

把 suite 的判据结果格式化为终端表格，并把失败判据格式化为
带上下文的错误块（出错的查询、测量值与容差）。
"""

import math
from typing import Any, Dict, List, Sequence


def _fmt(value: Any) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        if not math.isfinite(value):
            return "NA"
        return f"{value:.3e}"
    return str(value)


class SuiteFormatter:
    """判据报告格式化器类

    输入为判据记录列表，每条记录包含：
    - id / name: 判据编号与名称
    - passed: 是否通过
    - measured / tolerance / comparison: 测量值、容差与比较方式
    - status / reason / detail: 状态码、原因码与附加信息
    """

    WIDTH = 70

    def __init__(self, records: Sequence[Dict[str, Any]]):
        """初始化格式化器

        参数:
            records: 判据记录列表（emit_suite_report 生成的 criteria 字段）
        """
        self.records = list(records)

    def format_table(self) -> str:
        """格式化判据汇总表

        返回:
            多行字符串：表头、每个判据一行、总体结论
        """
        lines = ["=" * self.WIDTH, "[判据汇总] Acceptance criteria", "=" * self.WIDTH]
        lines.append(f"{'#':>3}  {'criterion':<32}{'measured':>11}  {'cmp':^3}{'tolerance':>11}  result")
        lines.append("-" * self.WIDTH)
        for rec in self.records:
            verdict = "PASS" if rec.get("passed") else "FAIL"
            lines.append(
                f"{rec.get('id', ''):>3}  {str(rec.get('name', ''))[:31]:<32}"
                f"{_fmt(rec.get('measured')):>11}  {rec.get('comparison', '<='):^3}"
                f"{_fmt(rec.get('tolerance')):>11}  {verdict}"
            )
        lines.append("-" * self.WIDTH)
        passed = sum(1 for rec in self.records if rec.get("passed"))
        overall = "pass" if passed == len(self.records) and self.records else "fail"
        lines.append(f"Overall: {overall} ({passed}/{len(self.records)} criteria)")
        lines.append("=" * self.WIDTH)
        return "\n".join(lines)

    def format_failure(self, record: Dict[str, Any]) -> str:
        """格式化单个失败判据

        参数:
            record: 判据记录

        返回:
            错误块字符串
        """
        lines = ["=" * self.WIDTH, f"[失败] criterion {record.get('id')}: {record.get('name')}",
                 "=" * self.WIDTH, ""]
        lines.append(f"[状态] {record.get('status', 'FAIL')}"
                     + (f" ({record['reason']})" if record.get("reason") else ""))
        lines.append(f"[测量值] {_fmt(record.get('measured'))} {record.get('comparison', '<=')} "
                     f"{_fmt(record.get('tolerance'))}")
        detail = record.get("detail") or {}
        if detail:
            lines.append("")
            lines.append("[详情]:")
            for key in sorted(detail):
                lines.append(f"   - {key}: {detail[key]}")
        lines.append("")
        lines.append("=" * self.WIDTH)
        return "\n".join(lines)

    def format_failures(self) -> List[str]:
        """格式化所有失败判据"""
        return [self.format_failure(rec) for rec in self.records if not rec.get("passed")]

    @staticmethod
    def format_general_error(error_message: str, error_type: str = "Error") -> str:
        """格式化一般错误消息

        参数:
            error_message: 错误消息
            error_type: 错误类型

        返回:
            格式化后的错误消息字符串
        """
        return "\n".join(["=" * SuiteFormatter.WIDTH, f"[错误] {error_type}", "=" * SuiteFormatter.WIDTH,
                          "", f"[错误详情] {error_message}", "", "=" * SuiteFormatter.WIDTH])
