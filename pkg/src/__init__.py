"""nvlab：NV 方程数值实验室"""
