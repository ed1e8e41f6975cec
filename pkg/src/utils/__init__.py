"""工具模块

包含日志、错误层级与退出码、判据报告格式化和产物写出。
"""
