import os
import sys

# 저장소 루트(run_checks.py, config.py 가 있는 곳)를 import 경로에 추가
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

CONFIG_DIR = os.path.join(ROOT, "data", "configs")
MEASURE_DIR = os.path.join(ROOT, "data", "measures")
