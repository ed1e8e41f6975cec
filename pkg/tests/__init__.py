"""测试模块

包含色散分析、求解器、KP 极限、运行配置与命令行的单元测试和集成测试。
"""
