"""
RunLedger - SQLite record of training runs

Cold path only: record_*() buffers events in memory and never touches
disk; flush() drains the buffer through aiosqlite in one async pass.
"""

import asyncio
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import aiosqlite

logger = logging.getLogger(__name__)


@dataclass
class LedgerEvent:
    """Event to be written to the ledger."""
    event_type: str
    data: Dict[str, Any]
    timestamp: float = field(default_factory=time.time)


class RunLedger:
    """
    Buffered SQLite ledger of runs, epoch metrics and ablation results.

    Design:
    - record_*() is synchronous and cheap, just appends to the buffer
    - flush() opens the database, writes every pending event, commits
    """

    def __init__(self, db_file: str):
        self.db_file = db_file
        self._pending: List[LedgerEvent] = []

    def _record(self, event_type: str, data: Dict[str, Any]):
        self._pending.append(LedgerEvent(event_type, data))

    def record_run_start(self, run_id: str, kind: str, seed: int, config: Dict[str, Any]):
        self._record("run_start", {
            "run_id": run_id,
            "kind": kind,
            "seed": seed,
            "config": json.dumps(config, sort_keys=True),
        })

    def record_epoch(self, run_id: str, epoch: int, loss: float, dev_em: float, dev_f1: float):
        self._record("epoch", {
            "run_id": run_id,
            "epoch": epoch,
            "loss": loss,
            "dev_em": dev_em,
            "dev_f1": dev_f1,
        })

    def record_run_end(self, run_id: str, status: str, steps: int):
        self._record("run_end", {"run_id": run_id, "status": status, "steps": steps})

    def record_ablation(self, seed: int, aba_em: float, baseline_em: float):
        self._record("ablation", {
            "seed": seed,
            "aba_em": aba_em,
            "baseline_em": baseline_em,
            "delta": aba_em - baseline_em,
        })

    @property
    def pending(self) -> int:
        return len(self._pending)

    def flush(self) -> int:
        """Write all pending events. Returns how many were written."""
        if not self._pending:
            return 0
        events, self._pending = self._pending, []
        written = asyncio.run(self._write(events))
        if written < len(events):
            missed = len(events) - written
            logger.warning(f"⚠️ Ledger: {missed} of {len(events)} events were not written to {self.db_file}")
        logger.info(f"💾 Ledger: wrote {written} events to {self.db_file}")
        return written

    async def _write(self, events: List[LedgerEvent]) -> int:
        written = 0
        async with aiosqlite.connect(self.db_file) as db:
            await self._init_tables(db)
            for event in events:
                if await self._process_event(db, event):
                    written += 1
            await db.commit()
        return written

    async def _init_tables(self, db):
        await db.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                run_id TEXT PRIMARY KEY,
                kind TEXT NOT NULL,
                seed INTEGER NOT NULL,
                config TEXT NOT NULL,
                status TEXT DEFAULT 'RUNNING',
                steps INTEGER DEFAULT 0,
                started_at REAL,
                finished_at REAL
            )
        """)

        await db.execute("""
            CREATE TABLE IF NOT EXISTS epochs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id TEXT NOT NULL,
                epoch INTEGER NOT NULL,
                loss REAL NOT NULL,
                dev_em REAL,
                dev_f1 REAL,
                timestamp REAL
            )
        """)

        await db.execute("""
            CREATE TABLE IF NOT EXISTS ablations (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                seed INTEGER NOT NULL,
                aba_em REAL NOT NULL,
                baseline_em REAL NOT NULL,
                delta REAL NOT NULL,
                timestamp REAL
            )
        """)

    async def _process_event(self, db, event: LedgerEvent) -> bool:
        try:
            data = event.data
            if event.event_type == "run_start":
                await db.execute("""
                    INSERT OR REPLACE INTO runs (run_id, kind, seed, config, started_at)
                    VALUES (?, ?, ?, ?, ?)
                """, (data["run_id"], data["kind"], data["seed"], data["config"], event.timestamp))

            elif event.event_type == "epoch":
                await db.execute("""
                    INSERT INTO epochs (run_id, epoch, loss, dev_em, dev_f1, timestamp)
                    VALUES (?, ?, ?, ?, ?, ?)
                """, (data["run_id"], data["epoch"], data["loss"], data["dev_em"], data["dev_f1"],
                      event.timestamp))

            elif event.event_type == "run_end":
                await db.execute("""
                    UPDATE runs SET status = ?, steps = ?, finished_at = ?
                    WHERE run_id = ?
                """, (data["status"], data["steps"], event.timestamp, data["run_id"]))

            elif event.event_type == "ablation":
                await db.execute("""
                    INSERT INTO ablations (seed, aba_em, baseline_em, delta, timestamp)
                    VALUES (?, ?, ?, ?, ?)
                """, (data["seed"], data["aba_em"], data["baseline_em"], data["delta"], event.timestamp))

            else:
                logger.warning(f"Unknown ledger event {event.event_type}")
                return False
            return True

        except Exception as e:
            logger.error(f"Failed to write ledger event {event.event_type}: {e}")
            return False

    async def _stats(self) -> Dict[str, Any]:
        async with aiosqlite.connect(self.db_file) as db:
            await self._init_tables(db)
            cursor = await db.execute("SELECT COUNT(*) FROM runs")
            runs = (await cursor.fetchone())[0]

            cursor = await db.execute("SELECT COUNT(*) FROM runs WHERE status = 'COMPLETED'")
            completed = (await cursor.fetchone())[0]

            cursor = await db.execute("SELECT MAX(dev_em) FROM epochs")
            best_em = (await cursor.fetchone())[0]

            cursor = await db.execute("SELECT AVG(delta), COUNT(*) FROM ablations")
            mean_delta, ablations = await cursor.fetchone()

            return {
                "runs": runs,
                "completed_runs": completed,
                "best_dev_em": best_em,
                "ablation_seeds": ablations,
                "mean_ablation_delta": mean_delta,
            }

    def get_stats(self) -> Dict[str, Any]:
        """Summary counts for logging."""
        return asyncio.run(self._stats())


def open_ledger(path: Optional[str]) -> Optional[RunLedger]:
    return RunLedger(path) if path else None
