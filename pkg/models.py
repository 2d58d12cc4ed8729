import logging
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

from sqlalchemy import DateTime, Integer, String, create_engine, select
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column, sessionmaker

logger = logging.getLogger(__name__)


class Base(DeclarativeBase):
    pass


# ----------- Run ledger -----------
class RunRecord(Base):
    """
    실행 기록 한 줄.

    같은 (config_digest, seed) 로 다시 돌렸을 때 report_digest 가 달라지면
    재현성 경고를 남긴다. seed 는 u64 라 문자열로 저장.
    """
    __tablename__ = "runs"

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    kind: Mapped[str] = mapped_column(String(40), index=True)
    config_path: Mapped[str] = mapped_column(String(500))
    config_digest: Mapped[str] = mapped_column(String(64), index=True)
    seed: Mapped[str] = mapped_column(String(20), index=True)
    verdict: Mapped[str] = mapped_column(String(20))
    exit_code: Mapped[int] = mapped_column(Integer)
    report_digest: Mapped[str] = mapped_column(String(64))
    # 로컬 시간 기준
    created_at: Mapped[datetime] = mapped_column(DateTime, default=datetime.now)

    def __repr__(self) -> str:
        return f"<RunRecord id={self.id} kind={self.kind} seed={self.seed} verdict={self.verdict}>"


@dataclass
class LedgerEntry:
    record_id: int
    previous_digest: Optional[str]

    @property
    def reproducible(self) -> bool:
        return self.previous_digest is None


def open_ledger(db_url: str) -> sessionmaker:
    engine = create_engine(db_url)
    Base.metadata.create_all(engine)
    return sessionmaker(engine, expire_on_commit=False)


def record_run(
    factory: sessionmaker,
    kind: str,
    config_path: str,
    config_digest: str,
    seed: int,
    verdict: str,
    exit_code: int,
    report_digest: str,
) -> LedgerEntry:
    """
    기록을 추가하고, 같은 설정/시드의 직전 기록과 리포트 digest 를 비교한다.
    어긋나면 previous_digest 에 직전 값을 담아 돌려준다.
    """
    with factory() as session:
        previous = session.scalars(
            select(RunRecord)
            .where(RunRecord.config_digest == config_digest, RunRecord.seed == str(seed))
            .order_by(RunRecord.id.desc())
            .limit(1)
        ).first()

        record = RunRecord(
            kind=kind,
            config_path=config_path,
            config_digest=config_digest,
            seed=str(seed),
            verdict=verdict,
            exit_code=exit_code,
            report_digest=report_digest,
        )
        session.add(record)
        session.commit()

        mismatch = None
        if previous is not None and previous.report_digest != report_digest:
            mismatch = previous.report_digest
            logger.warning(
                "reproducibility: %s seed=%s produced report %s, previous run %s had %s",
                config_path, seed, report_digest[:12], previous.id, mismatch[:12],
            )
        return LedgerEntry(record_id=record.id, previous_digest=mismatch)


def history(factory: sessionmaker, config_digest: str, seed: int) -> list:
    with factory() as session:
        return list(session.scalars(
            select(RunRecord)
            .where(RunRecord.config_digest == config_digest, RunRecord.seed == str(seed))
            .order_by(RunRecord.id)
        ))
