"""色散分析模块

该模块包含 NV 色散符号、λ 平面驻点分析、振荡积分求积和 X^{s,b} 工具。
"""
