import argparse
import glob
import hashlib
import os
import subprocess
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

# 프로젝트 루트 경로 (이 파일이 프로젝트 루트에 있다고 가정)
PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))

# run_checks.py 경로
RUN_CHECKS_PATH = os.path.join(PROJECT_ROOT, "run_checks.py")

VERDICTS = ("PASS", "FAIL", "INCONCLUSIVE")


@dataclass
class BatchItem:
    config: str
    returncode: int
    counts: Dict[str, int]
    report_digest: Optional[str] = None
    repeat_digest: Optional[str] = None
    lines: List[str] = field(default_factory=list)

    @property
    def reproducible(self) -> Optional[bool]:
        if self.repeat_digest is None:
            return None
        return self.repeat_digest == self.report_digest


def parse_run_checks_output(stdout: str) -> Tuple[Dict[str, int], List[str]]:
    """
    run_checks.py 의 stdout 에서 검사 줄을 센다.

    예) [sharpness] containments eps=0.5: PASS (N=13 k0=10 ratio=0.00390625)
        [run_checks] sharpness: PASS (report out/sharpness/report.json)

    마지막 요약 줄([run_checks] ...)은 세지 않는다.
    """
    counts = {v: 0 for v in VERDICTS}
    lines = []
    for line in stdout.splitlines():
        line = line.strip()
        if not line.startswith("[") or line.startswith("[run_checks]"):
            continue
        _, _, rest = line.partition("] ")
        _, sep, tail = rest.partition(": ")
        if not sep:
            continue
        verdict = tail.split(" ", 1)[0]
        if verdict in counts:
            counts[verdict] += 1
            lines.append(line)
    return counts, lines


def _digest(path: str) -> Optional[str]:
    if not os.path.isfile(path):
        return None
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def _report_path(config: str, out: str) -> str:
    stem = os.path.splitext(os.path.basename(config))[0]
    return os.path.join(out, stem, "report.json")


def run_one(config: str, out: str, extra: Sequence[str] = ()) -> subprocess.CompletedProcess:
    # Python 인터프리터는 현재 인터프리터(sys.executable)를 그대로 사용
    cmd = [sys.executable, RUN_CHECKS_PATH, "run", "--config", config, "--out", out, *extra]
    return subprocess.run(cmd, capture_output=True, text=True)


def run_batch(configs: Sequence[str], out: str, repeat: bool = False, extra: Sequence[str] = ()) -> List[BatchItem]:
    items = []
    for config in configs:
        print(f"[batch] {config} 실행 시작")
        completed = run_one(config, out, extra)
        stdout = (completed.stdout or "").strip()
        counts, lines = parse_run_checks_output(stdout)
        for line in lines:
            print(f"  {line}")
        if completed.returncode == 3:
            print("---------- 실패 stderr ----------")
            print((completed.stderr or "").strip())

        item = BatchItem(config, completed.returncode, counts, _digest(_report_path(config, out)), lines=lines)
        if repeat and completed.returncode != 3:
            # 같은 시드로 한 번 더 돌려 리포트 바이트를 비교
            run_one(config, out, extra)
            item.repeat_digest = _digest(_report_path(config, out))
        items.append(item)
    return items


def print_summary(items: Sequence[BatchItem]) -> None:
    total = {v: sum(i.counts[v] for i in items) for v in VERDICTS}
    print("\n---------- 실행 요약 (batch) ----------")
    print(f"· 설정 파일 수: {len(items)}")
    print(f"· PASS 검사 수: {total['PASS']}")
    print(f"· FAIL 검사 수: {total['FAIL']}")
    print(f"· INCONCLUSIVE 검사 수: {total['INCONCLUSIVE']}")
    print(f"· 설정 오류(exit 3): {sum(1 for i in items if i.returncode == 3)}")
    repeated = [i for i in items if i.reproducible is not None]
    if repeated:
        print(f"· 재실행 일치: {sum(1 for i in repeated if i.reproducible)}/{len(repeated)}")
    print("---------------------------------------\n")


def batch_exit_code(items: Sequence[BatchItem]) -> int:
    if any(i.returncode == 3 for i in items):
        return 3
    if any(i.returncode == 1 or i.reproducible is False for i in items):
        return 1
    if any(i.returncode == 2 for i in items):
        return 2
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="run every config of a directory through run_checks.py")
    parser.add_argument("configs", nargs="?", default=os.path.join(PROJECT_ROOT, "data", "configs"))
    parser.add_argument("--out", default="out")
    parser.add_argument("--repeat", action="store_true", help="run each config twice and compare report digests")
    parser.add_argument("--threads")
    parser.add_argument("--no-ledger", action="store_true")
    args = parser.parse_args(argv)

    if os.path.isdir(args.configs):
        configs = sorted(glob.glob(os.path.join(args.configs, "*.cfg")))
    else:
        configs = [args.configs]
    if not configs:
        print(f"[batch] 설정 파일이 없습니다: {args.configs}")
        return 3

    extra = []
    if args.threads:
        extra += ["--threads", args.threads]
    if args.no_ledger:
        extra.append("--no-ledger")
    items = run_batch(configs, args.out, repeat=args.repeat, extra=extra)
    print_summary(items)
    return batch_exit_code(items)


if __name__ == "__main__":
    sys.exit(main())
