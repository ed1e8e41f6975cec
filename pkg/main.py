"""NV 数值实验室主入口

这是项目的入口点，用于启动 nvlab 的CLI。
"""

import sys
from src.frontend.cli import main


if __name__ == '__main__':
    """主程序入口

    使用方式:
        python main.py roots --u 18
        python main.py evolve --preset kdv_soliton --E=-1 --T 1
        python main.py suite --quick
    """
    sys.exit(main())
