# -*- coding: utf-8 -*-
"""
Configuration File - 配置文件

存放默认参数，方便修改。命令行参数和 JSON 配置文档会覆盖这些值。
"""

TOOL_NAME = "nvlab"
TOOL_VERSION = "0.3.0"

# 默认输出文件夹路径
DEFAULT_OUTPUT_DIR = "nvlab_outputs"

# 默认随机种子
DEFAULT_SEED = 20240611

# 线程数环境变量（scipy.fft workers 与探针线程池）
THREADS_ENV = "NVLAB_THREADS"

# 振荡积分：相对容差、初始局部化尺度 K、稳定化层数、节点预算
DEFAULT_OSC_TOL = 1e-3
DEFAULT_LOCALIZATION_SCALE = 64.0
DEFAULT_STABILIZATION_LEVELS = 2
DEFAULT_NODE_BUDGET = 60_000_000

# 衰减探针默认时间网格：[1, 10^3] 上 8 个对数等距点
DEFAULT_DECAY_TIMES = [10.0 ** (3.0 * k / 7.0) for k in range(8)]
DEFAULT_SMALL_T_TIMES = [10.0 ** (-3 + 0.5 * k) for k in range(7)]
DEFAULT_U_PANEL = ["0", "18", "-6", "1+1j", "100"]

# 求解器默认网格
DEFAULT_NX = 256
DEFAULT_NY = 16
DEFAULT_LX = 40.0
DEFAULT_LY = 10.0
DEFAULT_DEALIAS = 2.0 / 3.0
DEFAULT_ENERGY = -1.0
DEFAULT_T_FINAL = 1.0

# 谱尾门限：外环能量占比
DEFAULT_TAIL_TOL = 1e-10

# X^{s,b} 默认参数
DEFAULT_XSB_S = 0.75
DEFAULT_XSB_EPS = 0.05
DEFAULT_BILINEAR_SAMPLES = 20
DEFAULT_RESONANCE_SAMPLES = 200_000

# KP 极限默认 κ 扫描
DEFAULT_KAPPAS = [4.0, 8.0, 16.0, 32.0]
