# analysis/reports.py

import csv
import hashlib
import json
import math
import os
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

VERDICTS = ("PASS", "FAIL", "INCONCLUSIVE")


def ensure_dir(path: str) -> None:
    if path:
        os.makedirs(path, exist_ok=True)


def to_jsonable(obj: Any) -> Any:
    """numpy 값/튜플/비유한 float 를 JSON 으로 옮길 수 있는 값으로."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def dumps_report(report: Dict[str, Any]) -> str:
    # 타임스탬프 없음, 키 정렬 → 같은 입력이면 같은 바이트
    return json.dumps(to_jsonable(report), ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def write_json(report: Dict[str, Any], path: str) -> str:
    """보고서를 쓰고 sha256 digest 를 돌려준다 (실행 장부용)."""
    ensure_dir(os.path.dirname(path))
    text = dumps_report(report)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def save_rows_csv(path: str, rows: List[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> None:
    if not rows:
        return
    ensure_dir(os.path.dirname(path))
    fieldnames = list(columns) if columns else list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=fieldnames, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: format_cell(r.get(k)) for k in fieldnames})


def verdict_line(kind: str, check: str, verdict: str, detail: str = "") -> str:
    """batch.py 가 파싱하는 고정 형식: [kind] check: VERDICT (detail)"""
    if verdict not in VERDICTS:
        raise ValueError(f"unknown verdict {verdict!r}")
    line = f"[{kind}] {check}: {verdict}"
    return f"{line} ({detail})" if detail else line


def combine_verdicts(verdicts: Sequence[str]) -> str:
    """하나라도 FAIL 이면 FAIL, 아니면 INCONCLUSIVE 가 있으면 INCONCLUSIVE."""
    if any(v == "FAIL" for v in verdicts):
        return "FAIL"
    if any(v == "INCONCLUSIVE" for v in verdicts):
        return "INCONCLUSIVE"
    return "PASS"
