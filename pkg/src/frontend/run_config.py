"""运行配置解析器

从 JSON 文档与命令行标志解析 RunConfig。
解析顺序：config.py 默认值 < JSON 文档 < 显式命令行标志。
"""

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from src.utils.error_handler import ConfigError

try:
    import config
except ImportError:
    # config.py 不存在时使用内置默认值
    class config:
        TOOL_NAME = "nvlab"
        TOOL_VERSION = "0.3.0"
        DEFAULT_OUTPUT_DIR = "nvlab_outputs"
        DEFAULT_SEED = 20240611
        THREADS_ENV = "NVLAB_THREADS"
        DEFAULT_OSC_TOL = 1e-3
        DEFAULT_LOCALIZATION_SCALE = 64.0
        DEFAULT_STABILIZATION_LEVELS = 2
        DEFAULT_NODE_BUDGET = 60_000_000
        DEFAULT_DECAY_TIMES = [10.0 ** (3.0 * k / 7.0) for k in range(8)]
        DEFAULT_SMALL_T_TIMES = [10.0 ** (-3 + 0.5 * k) for k in range(7)]
        DEFAULT_U_PANEL = ["0", "18", "-6", "1+1j", "100"]
        DEFAULT_NX = 256
        DEFAULT_NY = 16
        DEFAULT_LX = 40.0
        DEFAULT_LY = 10.0
        DEFAULT_DEALIAS = 2.0 / 3.0
        DEFAULT_ENERGY = -1.0
        DEFAULT_T_FINAL = 1.0
        DEFAULT_TAIL_TOL = 1e-10
        DEFAULT_XSB_S = 0.75
        DEFAULT_XSB_EPS = 0.05
        DEFAULT_BILINEAR_SAMPLES = 20
        DEFAULT_RESONANCE_SAMPLES = 200_000
        DEFAULT_KAPPAS = [4.0, 8.0, 16.0, 32.0]


# 子命令别名 → 规范名
ALIASES = {
    "symbol": "symbol", "sym": "symbol",
    "roots": "roots", "r": "roots",
    "oscint": "oscint", "o": "oscint",
    "decay": "decay", "d": "decay",
    "evolve": "evolve", "e": "evolve",
    "invariants": "invariants", "inv": "invariants",
    "bilinear": "bilinear", "bl": "bilinear",
    "resonance": "resonance", "res": "resonance",
    "kplimit": "kplimit", "kp": "kplimit",
    "suite": "suite", "s": "suite",
}

SUBCOMMANDS = ("symbol", "roots", "oscint", "decay", "evolve", "invariants",
               "bilinear", "resonance", "kplimit", "suite")


def _grid_params(nx=None, ny=None, Lx=None, Ly=None) -> Dict[str, Tuple[str, Any, str]]:
    return {
        "nx": ("int", nx if nx is not None else config.DEFAULT_NX, "x 方向点数（2 的幂）"),
        "ny": ("int", ny if ny is not None else config.DEFAULT_NY, "y 方向点数（2 的幂）"),
        "Lx": ("float", Lx if Lx is not None else config.DEFAULT_LX, "x 方向盒长"),
        "Ly": ("float", Ly if Ly is not None else config.DEFAULT_LY, "y 方向盒长"),
        "dealias": ("float", config.DEFAULT_DEALIAS, "保留的半频带比例"),
    }


_INITIAL_DATA = {
    "preset": ("str", "kdv_soliton", "初值预设：gaussian | kdv_soliton | single_mode | blowup"),
    "c": ("float", 1.0, "孤子速度 / 爆破参数 c"),
    "x0": ("float", -4.0, "孤子初始位置"),
    "amplitude": ("float", 1.0, "振幅"),
    "sigma": ("float", 1.0, "高斯宽度"),
    "kx": ("int", 1, "单模 x 波数指标"),
    "ky": ("int", 1, "单模 y 波数指标"),
    "a": ("float", 1.0, "爆破参数 a"),
    "d": ("float", 1.0, "爆破参数 d"),
}


def _osc_controls() -> Dict[str, Tuple[str, Any, str]]:
    return {
        "tol": ("float", config.DEFAULT_OSC_TOL, "稳定化相对容差"),
        "cutoff_radius": ("float", config.DEFAULT_LOCALIZATION_SCALE, "初始局部化尺度 K"),
        "levels": ("int", config.DEFAULT_STABILIZATION_LEVELS, "稳定化层数"),
        "node_budget": ("int", config.DEFAULT_NODE_BUDGET, "每层节点预算"),
    }


# 参数模式：名称 → (类型, 默认值, 帮助)
PARAM_SCHEMA: Dict[str, Dict[str, Tuple[str, Any, str]]] = {
    "symbol": {
        "xi1": ("float", 1.0, "频率 ξ1"),
        "xi2": ("float", 0.0, "频率 ξ2"),
        "tau": ("float", 0.0, "时间频率 τ"),
        "E": ("float", config.DEFAULT_ENERGY, "能量 E"),
    },
    "roots": {
        "u": ("complex", "18", "群速度参数 u"),
        "lam": ("complex", None, "可选：检查分解恒等式的 λ"),
    },
    "oscint": dict({
        "t": ("float", 1.0, "时间 t > 0"),
        "u": ("complex", "0", "群速度参数 u"),
        "E": ("float", config.DEFAULT_ENERGY, "能量 E < 0"),
        "alpha": ("float", 0.5, "振幅指数 α ∈ [0, 1)"),
        "beta": ("float", 0.0, "对数相位参数 β"),
        "representation": ("choice:xi,lambda,both", "both", "积分表示"),
    }, **_osc_controls()),
    "decay": dict({
        "alpha": ("float", 0.5, "振幅指数 α"),
        "beta": ("float", 0.0, "对数相位参数 β"),
        "E": ("float", config.DEFAULT_ENERGY, "能量 E < 0"),
        "u_set": ("complex_list", config.DEFAULT_U_PANEL, "u 取值列表"),
        "t_grid": ("float_list", config.DEFAULT_DECAY_TIMES, "时间网格"),
        "eps": ("float", 0.05, "指数裕量 ε"),
        "small_t": ("bool", False, "使用短时间网格与 (α+2)/3 指数"),
        "representation": ("choice:xi,lambda", "lambda", "积分表示"),
    }, **_osc_controls()),
    "evolve": dict(_grid_params(), **_INITIAL_DATA, **{
        "E": ("float", config.DEFAULT_ENERGY, "能量 E"),
        "T": ("float", config.DEFAULT_T_FINAL, "终止时间"),
        "dt": ("float", None, "时间步长（默认 1e-3·Lx/nx）"),
        "samples": ("int", 10, "守恒量记录次数"),
        "linear": ("bool", False, "关闭非线性项"),
        "tail_tol": ("float", config.DEFAULT_TAIL_TOL, "谱尾门限"),
    }),
    "invariants": dict(_grid_params(128, 128, 20.0, 20.0), **_INITIAL_DATA, **{
        "E": ("float", config.DEFAULT_ENERGY, "能量 E"),
    }),
    "bilinear": {
        "s": ("float", config.DEFAULT_XSB_S, "Sobolev 指数 s > 1/2"),
        "eps": ("float", config.DEFAULT_XSB_EPS, "ε"),
        "E": ("float", config.DEFAULT_ENERGY, "能量 E < 0"),
        "samples": ("int", config.DEFAULT_BILINEAR_SAMPLES, "随机样本数"),
        "nt": ("int", 32, "时间点数"),
        "n": ("int", 16, "空间点数（每个方向）"),
        "L": ("float", 4.0 * math.pi, "空间盒长"),
        "T": ("float", 4.0, "时间窗长度"),
        "trend": ("float_list", [], "可选：能量趋势的 E 列表"),
    },
    "resonance": {
        "N": ("int", 1, "低频壳 N"),
        "Nhat": ("int", 16, "高频壳 Ň ≥ 4N"),
        "L": ("int", 8, "调制壳 L"),
        "Lhat": ("int", 1, "调制壳 Ľ"),
        "E": ("float", config.DEFAULT_ENERGY, "能量 E < 0"),
        "samples": ("int", config.DEFAULT_RESONANCE_SAMPLES, "每次试验的采样数"),
        "trials": ("int", 8, "ξ̌ 试验次数"),
    },
    "kplimit": {
        "sign": ("choice:plus,minus", "minus", "plus: E = +κ² (KPI); minus: E = −κ² (KPII)"),
        "kappas": ("float_list", config.DEFAULT_KAPPAS, "κ 扫描值"),
        "preset": ("choice:dx_gaussian,soliton", "dx_gaussian", "v0 预设"),
        "nx": ("int", 64, "x 方向点数"),
        "ny": ("int", 64, "Y 方向点数"),
        "Lx": ("float", 40.0, "x 方向盒长"),
        "Ly": ("float", 40.0, "Y 方向盒长"),
        "sigma": ("float", 2.5, "高斯宽度"),
        "amplitude": ("float", 0.5, "振幅"),
        "c": ("float", 1.0, "孤子速度"),
        "T": ("float", 0.1, "极限方程演化时间"),
        "dt": ("float", 1e-3, "时间步长"),
        "h": ("float", 0.01, "KP 映射检查的快照间隔"),
    },
    "suite": {
        "quick": ("bool", False, "缩减面板（同样的容差）"),
    },
}


@dataclass
class RunConfig:
    """一次运行的完整配置

    属性:
        subcommand: 规范子命令名
        params: 解析后的参数（已转换类型）
        seed: 随机种子
        output_dir: 输出目录
        threads: 线程数（scipy.fft workers 与探针线程池）
    """
    subcommand: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = config.DEFAULT_SEED
    output_dir: str = config.DEFAULT_OUTPUT_DIR
    threads: int = 1

    def to_record(self) -> Dict[str, Any]:
        """manifest 中回显的完整配置（复数参数写为字符串）"""
        def encode(value):
            if isinstance(value, complex):
                return repr(value)
            if isinstance(value, list):
                return [encode(v) for v in value]
            return value
        return {
            "subcommand": self.subcommand,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "threads": self.threads,
            "params": {k: encode(v) for k, v in sorted(self.params.items())},
        }


class RunConfigParser:
    """运行配置解析器

    负责 JSON 文档读取、类型转换、别名归一化与三层合并。
    """

    TOP_LEVEL_KEYS = {"subcommand", "seed", "output_dir", "params"}

    @staticmethod
    def canonical(name: str) -> str:
        """把子命令或别名归一化为规范名

        参数:
            name: 用户给出的子命令名

        返回:
            规范子命令名
        """
        if name not in ALIASES:
            raise ConfigError(f"unknown subcommand {name!r}; expected one of {', '.join(SUBCOMMANDS)}")
        return ALIASES[name]

    @staticmethod
    def load_document(path: str) -> Dict[str, Any]:
        """读取 JSON 配置文档

        参数:
            path: 文件路径

        返回:
            文档字典

        说明:
            文件不存在、JSON 非法、顶层不是对象或出现未知键时抛出 ConfigError。
        """
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}")
        if not isinstance(document, dict):
            raise ConfigError("config document must be a JSON object")
        unknown = sorted(set(document) - RunConfigParser.TOP_LEVEL_KEYS)
        if unknown:
            raise ConfigError(f"unknown top-level config keys: {', '.join(unknown)}")
        if "params" in document and not isinstance(document["params"], dict):
            raise ConfigError("'params' must be a JSON object")
        return document

    @staticmethod
    def coerce(kind: str, value: Any, name: str) -> Any:
        """把原始值转换为模式声明的类型

        参数:
            kind: 类型名（float / int / complex / str / bool / *_list / choice:a,b）
            value: 原始值（JSON 值或命令行字符串）
            name: 参数名（用于错误信息）

        返回:
            转换后的值
        """
        if value is None:
            return None
        try:
            if kind == "float":
                if isinstance(value, bool):
                    raise TypeError
                return float(value)
            if kind == "int":
                if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                    raise TypeError
                return int(value)
            if kind == "complex":
                if isinstance(value, (list, tuple)) and len(value) == 2:
                    return complex(float(value[0]), float(value[1]))
                return complex(str(value).replace(" ", "").replace("i", "j"))
            if kind == "str":
                if not isinstance(value, str):
                    raise TypeError
                return value
            if kind == "bool":
                if isinstance(value, bool):
                    return value
                text = str(value).lower()
                if text in ("true", "1", "yes"):
                    return True
                if text in ("false", "0", "no"):
                    return False
                raise ValueError
            if kind in ("float_list", "complex_list"):
                if isinstance(value, str):
                    value = [v for v in value.split(",") if v]
                if not isinstance(value, (list, tuple)):
                    raise TypeError
                item = kind.split("_")[0]
                return [RunConfigParser.coerce(item, v, name) for v in value]
            if kind.startswith("choice:"):
                options = kind.split(":", 1)[1].split(",")
                if value not in options:
                    raise ConfigError(f"parameter {name!r} must be one of {options}, got {value!r}")
                return value
        except ConfigError:
            raise
        except (TypeError, ValueError):
            raise ConfigError(f"parameter {name!r} expects {kind}, got {value!r}")
        raise ConfigError(f"unsupported parameter kind {kind!r} for {name!r}")

    @staticmethod
    def resolve(subcommand: str, document: Optional[Dict[str, Any]] = None,
                flags: Optional[Dict[str, Any]] = None, seed: Optional[int] = None,
                output_dir: Optional[str] = None, threads: int = 1) -> RunConfig:
        """三层合并得到 RunConfig

        参数:
            subcommand: 命令行子命令（可为别名）
            document: 已读取的 JSON 文档（可选）
            flags: 命令行显式给出的参数（值为 None 表示未给出）
            seed / output_dir: 命令行全局标志（None 表示未给出）
            threads: 线程数

        返回:
            RunConfig 对象
        """
        name = RunConfigParser.canonical(subcommand)
        document = document or {}
        if "subcommand" in document and RunConfigParser.canonical(document["subcommand"]) != name:
            raise ConfigError(
                f"config document is for {document['subcommand']!r} but the command line asks for {subcommand!r}")
        schema = PARAM_SCHEMA[name]
        doc_params = document.get("params", {})
        unknown = sorted(set(doc_params) - set(schema))
        if unknown:
            raise ConfigError(f"unknown parameters for {name}: {', '.join(unknown)}")

        params: Dict[str, Any] = {}
        for key, (kind, default, _) in schema.items():
            value = default
            if key in doc_params:
                value = doc_params[key]
            if flags and flags.get(key) is not None:
                value = flags[key]
            params[key] = RunConfigParser.coerce(kind, value, key)

        resolved_seed = config.DEFAULT_SEED
        if "seed" in document:
            resolved_seed = RunConfigParser.coerce("int", document["seed"], "seed")
        if seed is not None:
            resolved_seed = int(seed)
        resolved_dir = document.get("output_dir", config.DEFAULT_OUTPUT_DIR)
        if output_dir is not None:
            resolved_dir = output_dir
        if not isinstance(resolved_dir, str):
            raise ConfigError("'output_dir' must be a string")
        if threads < 1:
            raise ConfigError(f"thread count must be a positive integer, got {threads}")
        return RunConfig(name, params, resolved_seed, resolved_dir, threads)

    @staticmethod
    def threads_from_env(environ: Optional[Dict[str, str]] = None) -> int:
        """读取线程数环境变量（缺省为 1）"""
        environ = os.environ if environ is None else environ
        raw = environ.get(config.THREADS_ENV)
        if raw is None or raw == "":
            return 1
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{config.THREADS_ENV} must be a positive integer, got {raw!r}")
        if value < 1:
            raise ConfigError(f"{config.THREADS_ENV} must be a positive integer, got {raw!r}")
        return value


def schema_for(subcommand: str) -> List[Tuple[str, str, Any, str]]:
    """返回 (名称, 类型, 默认值, 帮助) 列表，供 CLI 自动生成标志"""
    name = RunConfigParser.canonical(subcommand)
    return [(key, kind, default, help_text) for key, (kind, default, help_text) in PARAM_SCHEMA[name].items()]
