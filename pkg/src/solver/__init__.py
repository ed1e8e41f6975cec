"""求解器模块

该模块包含周期网格、ETDRK4 积分器、NV 伪谱求解器和 KP 极限检验。
"""
