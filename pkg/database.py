"""
Run registry for the MoCDMA link simulator.
Records every completed BER run and its sweep points in a local sqlite file.
"""
import sqlite3
from typing import Optional, List, Dict, Any, Generator
from contextlib import contextmanager

import config
import utils

logger = utils.get_logger(__name__)


def get_db_connection(db_path: str = config.DB_NAME) -> sqlite3.Connection:
    """Get database connection with row factory"""
    try:
        conn = sqlite3.connect(db_path)
        conn.row_factory = sqlite3.Row
        conn.execute("PRAGMA foreign_keys = ON")
        return conn
    except sqlite3.Error as e:
        logger.error(f"Database connection error: {e}")
        raise


@contextmanager
def db_cursor(db_path: str = config.DB_NAME) -> Generator[sqlite3.Cursor, None, None]:
    """Context manager for database cursor with auto-commit/rollback"""
    conn = get_db_connection(db_path)
    try:
        yield conn.cursor()
        conn.commit()
    except sqlite3.Error as e:
        conn.rollback()
        logger.error(f"Database error in cursor context: {e}")
        raise
    finally:
        conn.close()


def init_db(db_path: str = config.DB_NAME):
    """Initialize database with all tables and indices"""
    try:
        with db_cursor(db_path) as cursor:
            cursor.execute('''
                CREATE TABLE IF NOT EXISTS runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    digest TEXT NOT NULL,
                    name TEXT NOT NULL,
                    seed INTEGER NOT NULL,
                    scheme TEXT NOT NULL,
                    emission TEXT NOT NULL,
                    wall_time REAL,
                    csv_path TEXT,
                    created_at TEXT DEFAULT CURRENT_TIMESTAMP
                )
            ''')

            cursor.execute('''
                CREATE TABLE IF NOT EXISTS sweep_points (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id INTEGER NOT NULL,
                    Q REAL NOT NULL,
                    nm_index INTEGER NOT NULL,
                    ber REAL NOT NULL,
                    ci_low REAL,
                    ci_high REAL,
                    bits INTEGER NOT NULL,
                    errors INTEGER NOT NULL,
                    FOREIGN KEY (run_id) REFERENCES runs(id) ON DELETE CASCADE
                )
            ''')

            cursor.execute('CREATE INDEX IF NOT EXISTS idx_runs_digest ON runs(digest)')
            cursor.execute('CREATE INDEX IF NOT EXISTS idx_points_run ON sweep_points(run_id)')

            logger.info("Database initialized successfully")

    except sqlite3.Error as e:
        logger.error(f"Database initialization error: {e}")
        raise


def record_report(report, emission: str, csv_path: str = '',
                  db_path: str = config.DB_NAME) -> Optional[int]:
    """Store a BerReport and its rows; returns the run id"""
    try:
        with db_cursor(db_path) as cursor:
            cursor.execute('''
                INSERT INTO runs (digest, name, seed, scheme, emission, wall_time, csv_path)
                VALUES (?, ?, ?, ?, ?, ?, ?)
            ''', (
                report.digest,
                report.name,
                report.seed,
                report.scheme.value,
                emission,
                report.wall_time,
                csv_path,
            ))
            run_id = cursor.lastrowid
            cursor.executemany('''
                INSERT INTO sweep_points (run_id, Q, nm_index, ber, ci_low, ci_high, bits, errors)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            ''', [
                (run_id, r['Q'], r['nm_index'], r['ber'], r['ci_low'], r['ci_high'], r['bits'], r['errors'])
                for r in report.rows()
            ])
            logger.info(f"Run recorded: ID {run_id} ({report.name}, digest {report.digest})")
            return run_id

    except sqlite3.Error as e:
        logger.error(f"Error recording run: {e}")
        return None


def get_runs(digest: str = '', db_path: str = config.DB_NAME) -> List[Dict[str, Any]]:
    """Recorded runs, newest first, optionally for one config digest"""
    try:
        conn = get_db_connection(db_path)
        try:
            query = 'SELECT * FROM runs WHERE 1=1'
            params = []
            if digest:
                query += ' AND digest = ?'
                params.append(digest)
            query += ' ORDER BY id DESC'
            return [dict(row) for row in conn.execute(query, params).fetchall()]
        finally:
            conn.close()

    except sqlite3.Error as e:
        logger.error(f"Error getting runs: {e}")
        return []


def get_sweep_points(run_id: int, db_path: str = config.DB_NAME) -> List[Dict[str, Any]]:
    """Sweep rows of one run, sorted by (Q, NM)"""
    try:
        conn = get_db_connection(db_path)
        try:
            rows = conn.execute(
                'SELECT Q, nm_index, ber, ci_low, ci_high, bits, errors FROM sweep_points '
                'WHERE run_id = ? ORDER BY Q, nm_index', (run_id,)
            ).fetchall()
            return [dict(row) for row in rows]
        finally:
            conn.close()

    except sqlite3.Error as e:
        logger.error(f"Error getting sweep points for run {run_id}: {e}")
        return []


def delete_run(run_id: int, db_path: str = config.DB_NAME) -> bool:
    """Delete a run and its sweep points"""
    try:
        with db_cursor(db_path) as cursor:
            cursor.execute('DELETE FROM runs WHERE id = ?', (run_id,))
            if cursor.rowcount == 0:
                logger.warning(f"No run with ID {run_id}")
                return False
            logger.info(f"Run deleted: ID {run_id}")
            return True

    except sqlite3.Error as e:
        logger.error(f"Error deleting run {run_id}: {e}")
        return False
