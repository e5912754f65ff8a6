"""Seed data for the demo forum application.

Every endpoint reads from its own table so that scans at coarse injection
granularities still touch each sink independently.  Seeding drops and
recreates everything, so repeated runs always start from the same rows.
"""

from __future__ import annotations

from ..dbclient import Connection
from .sanitize import sql_quote

SESSION_TOPIC = b"Populate current topic demo"
THEME_VALUE = b"darkmode-disabled-v2"
PAIR_TITLE = b"alpha release notes"
PAIR_LABEL = b"beta milestone recap"

# One row of display text per sink table; id is always 1.
SINGLE_VALUE_SEEDS: dict[str, bytes] = {
    "htmltext_unsanitized": b"latest announcements",
    "htmltext_correct": b"moderation guidelines",
    "attr_double_vuln": b"draft search terms",
    "attr_double_correct": b"saved filter name",
    "attr_single_vuln": b"pinned board motto",
    "attr_single_correct": b"weekly digest title",
    "htmldata_vuln": b"inline widget caption",
    "htmldata_correct": b"sidebar greeting text",
    "js_double_vuln": b"profile display name",
    "js_double_correct": b"editor status line",
    "js_single_correct": b"compose box hint",
    "css_double_vuln": b"banner content words",
    "css_double_correct": b"footer content words",
    "css_single_vuln": b"list font label",
    "css_single_correct": b"quote font label",
    "uri_begin_vuln": b"guides/getting-started",
    "uri_begin_correct": b"handbook/setup-notes",
    "uri_else_vuln": b"release-archive-page",
    "uri_else_correct": b"upgrade-plan-overview",
}

# Expected row count per table after a successful seed.
ROW_COUNTS: dict[str, int] = {
    "sessions": 1,
    "settings": 1,
    "pair": 1,
    **{name: 1 for name in SINGLE_VALUE_SEEDS},
}


def _recreate(db: Connection, table: str, columns: str) -> None:
    db.query(f"DROP TABLE IF EXISTS {table}".encode())
    db.query(f"CREATE TABLE {table} ({columns})".encode())


def seed_database(db: Connection) -> dict[str, int]:
    """Drop and recreate every demo table; returns rows inserted per table."""
    inserted: dict[str, int] = {}

    _recreate(db, "sessions", "id INT, topic VARCHAR(200)")
    db.query(b"INSERT INTO sessions (id, topic) VALUES (1, " + sql_quote(SESSION_TOPIC) + b")")
    inserted["sessions"] = 1

    _recreate(db, "settings", "name VARCHAR(50), value VARCHAR(100)")
    db.query(
        b"INSERT INTO settings (name, value) VALUES ('theme', " + sql_quote(THEME_VALUE) + b")"
    )
    inserted["settings"] = 1

    _recreate(db, "pair", "id INT, title VARCHAR(200), label VARCHAR(200)")
    db.query(
        b"INSERT INTO pair (id, title, label) VALUES (1, "
        + sql_quote(PAIR_TITLE)
        + b", "
        + sql_quote(PAIR_LABEL)
        + b")"
    )
    inserted["pair"] = 1

    for table, value in SINGLE_VALUE_SEEDS.items():
        _recreate(db, table, "id INT, value VARCHAR(255)")
        db.query(
            f"INSERT INTO {table} (id, value) VALUES (1, ".encode() + sql_quote(value) + b")"
        )
        inserted[table] = 1

    return inserted
