import json
from datetime import datetime
from pathlib import Path
from typing import Any

import duckdb

from .logger import get_logger

logger = get_logger(__name__)


class ResultsArchive:
    """
    DuckDB-backed archive of study rows and property-suite entries.
    Every row carries the run manifest so studies can be compared with SQL afterwards.
    """

    def __init__(self, db_path: Path):
        self.db_path = db_path
        self.db_path.parent.mkdir(parents=True, exist_ok=True)

        self.conn = duckdb.connect(str(self.db_path))
        self._init_schema()

    def _init_schema(self) -> None:
        self.conn.execute("CREATE SEQUENCE IF NOT EXISTS row_id_seq START 1")

        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS study_rows (
                row_id INTEGER DEFAULT nextval('row_id_seq'),
                timestamp TIMESTAMP,
                method VARCHAR,
                mesh VARCHAR,
                nu DOUBLE,
                k INTEGER,
                h DOUBLE,
                size INTEGER,
                e_1h DOUBLE,
                e_grad_rec DOUBLE,
                e_L2 DOUBLE,
                e_rec DOUBLE,
                e_p DOUBLE,
                manifest JSON
            )
        """)

        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS suite_entries (
                row_id INTEGER DEFAULT nextval('row_id_seq'),
                timestamp TIMESTAMP,
                suite VARCHAR,
                identity VARCHAR,
                config VARCHAR,
                max_residual DOUBLE,
                threshold DOUBLE,
                passed BOOLEAN,
                manifest JSON
            )
        """)

    def log_study_rows(self, rows: list[dict[str, Any]], manifest: dict[str, Any]) -> None:
        """Store convergence-study rows (one per mesh level and degree)."""
        try:
            ts = datetime.now()
            manifest_json = json.dumps(manifest, default=str)
            query = """
                INSERT INTO study_rows (
                    timestamp, method, mesh, nu, k, h, size,
                    e_1h, e_grad_rec, e_L2, e_rec, e_p, manifest
                ) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            """
            for row in rows:
                self.conn.execute(
                    query,
                    (
                        ts,
                        row.get("method"),
                        row.get("mesh"),
                        row.get("nu"),
                        row.get("k"),
                        row.get("h"),
                        row.get("size"),
                        row.get("e_1h"),
                        row.get("e_grad_rec"),
                        row.get("e_L2"),
                        row.get("e_rec"),
                        row.get("e_p"),
                        manifest_json,
                    ),
                )
        except Exception:
            logger.exception("Failed to archive study rows")

    def log_suite_entries(self, entries: list[dict[str, Any]], manifest: dict[str, Any]) -> None:
        try:
            ts = datetime.now()
            manifest_json = json.dumps(manifest, default=str)
            query = """
                INSERT INTO suite_entries (
                    timestamp, suite, identity, config, max_residual, threshold, passed, manifest
                ) VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            """
            for entry in entries:
                self.conn.execute(
                    query,
                    (
                        ts,
                        entry.get("suite"),
                        entry.get("identity"),
                        entry.get("config"),
                        entry.get("max_residual"),
                        entry.get("threshold"),
                        entry.get("passed"),
                        manifest_json,
                    ),
                )
        except Exception:
            logger.exception("Failed to archive suite entries")

    def get_stats(self) -> dict[str, Any]:
        """Basic counts over the archive."""
        try:
            res_rows = self.conn.execute("SELECT COUNT(*) FROM study_rows").fetchone()
            n_rows = res_rows[0] if res_rows else 0

            res_suites = self.conn.execute("SELECT COUNT(*) FROM suite_entries").fetchone()
            n_entries = res_suites[0] if res_suites else 0

            res_failed = self.conn.execute("SELECT COUNT(*) FROM suite_entries WHERE NOT passed").fetchone()
            n_failed = res_failed[0] if res_failed else 0

            return {
                "study_rows": n_rows,
                "suite_entries": n_entries,
                "suite_failures": n_failed,
            }
        except Exception:
            logger.exception("Failed to query archive statistics")
            return {}

    def close(self) -> None:
        self.conn.close()
