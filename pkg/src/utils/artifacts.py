"""产物写出器

负责 CSV / JSON / 二进制快照 / manifest 的写出。除 manifest 中的时间戳外，
同一配置与种子下的所有输出逐字节一致。
"""

import csv
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np


NA = "NA"


def format_cell(value: Any) -> Any:
    """把单元格转换为稳定的文本表示

    参数:
        value: 任意标量（None / 浮点 / 复数 / 布尔 / 字符串）

    返回:
        浮点统一为 %.17g；None 与非有限值写作 NA
    """
    if value is None:
        return NA
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "%.17g" % value if math.isfinite(value) else NA
    if isinstance(value, (complex, np.complexfloating)):
        return f"{format_cell(value.real)}{'+' if value.imag >= 0 else ''}{format_cell(value.imag)}j"
    return str(value)


def to_jsonable(value: Any) -> Any:
    """递归转换为 JSON 可序列化对象（复数拆为 [re, im]，非有限值写作 "NA"）"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(float(value)) else NA
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(value.real), to_jsonable(value.imag)]
    if value is None or isinstance(value, str):
        return value
    if hasattr(value, "to_record"):
        return to_jsonable(value.to_record())
    return str(value)


def dumps(document: Any) -> str:
    return json.dumps(to_jsonable(document), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def sha256_of(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class ArtifactWriter:
    """产物写出器

    每次运行对应一个输出目录；写出的文件名被记录下来，
    最后由 write_manifest 汇总 sha256。
    """

    def __init__(self, output_dir: str):
        """初始化写出器

        参数:
            output_dir: 输出目录（不存在时自动创建）
        """
        self.output_dir = output_dir
        self.files: List[str] = []
        os.makedirs(output_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _register(self, name: str) -> str:
        if name not in self.files:
            self.files.append(name)
        return self.path(name)

    def write_csv(self, name: str, rows: Sequence[Dict[str, Any]],
                  columns: Optional[Sequence[str]] = None) -> str:
        """写出 CSV

        参数:
            name: 文件名
            rows: 行字典列表
            columns: 列顺序（默认取第一行的键顺序）

        返回:
            文件路径

        说明:
            缺失或非有限数值写作 NA；若存在 reason 列，由调用方填写原因码。
        """
        if columns is None:
            columns = list(rows[0].keys()) if rows else []
        path = self._register(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n",
                                    extrasaction="ignore")
            writer.writeheader()
            for row in rows:
                writer.writerow({c: format_cell(row.get(c)) for c in columns})
        return path

    def write_json(self, name: str, document: Any) -> str:
        """写出排序键、缩进为 2 的 JSON 文档"""
        path = self._register(name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(dumps(document))
        return path

    def write_snapshot(self, name: str, values: np.ndarray, header: Dict[str, Any]) -> List[str]:
        """写出二进制快照及其 JSON 头

        参数:
            name: 基本名（生成 name.bin 与 name.json）
            values: 实数场，按行优先（C 顺序）写出 float64
            header: 头部信息（网格、时间、能量等）

        返回:
            两个文件的路径
        """
        data = np.ascontiguousarray(values, dtype=np.float64)
        bin_path = self._register(f"{name}.bin")
        data.tofile(bin_path)
        meta = dict(header)
        meta.update({
            "dtype": "float64",
            "endianness": sys.byteorder,
            "layout": "row-major",
            "shape": list(data.shape),
            "data_file": f"{name}.bin",
        })
        return [bin_path, self.write_json(f"{name}.json", meta)]

    def write_manifest(self, tool: str, version: str, subcommand: str,
                       resolved_config: Dict[str, Any], seed: int, status: str) -> str:
        """写出 manifest.json（唯一带时间戳的文件）"""
        manifest = {
            "tool": tool,
            "version": version,
            "subcommand": subcommand,
            "config": resolved_config,
            "seed": seed,
            "status": status,
            "timestamp_utc": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "artifacts": {name: sha256_of(self.path(name)) for name in sorted(self.files)},
        }
        path = self.path("manifest.json")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(dumps(manifest))
        return path


def read_snapshot(json_path: str) -> np.ndarray:
    """按 JSON 头读回二进制快照"""
    with open(json_path, "r", encoding="utf-8") as f:
        header = json.load(f)
    dtype = np.dtype(header["dtype"]).newbyteorder("<" if header["endianness"] == "little" else ">")
    bin_path = os.path.join(os.path.dirname(json_path), header["data_file"])
    return np.fromfile(bin_path, dtype=dtype).reshape(header["shape"])


def rows_with_reason(rows: Iterable[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """为含 NA 数值但缺少 reason 的行补上 NONFINITE 原因码"""
    out = []
    for row in rows:
        row = dict(row)
        has_na = any(format_cell(v) == NA for k, v in row.items() if k != "reason")
        if has_na and not row.get("reason"):
            row["reason"] = "NONFINITE"
        out.append(row)
    return out
