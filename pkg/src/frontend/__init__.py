"""前端接口模块

该模块包含与用户交互的接口：运行配置解析、验收判据组和命令行工具。
"""
