"""A self-contained vulnerable web application used for live testing.

The fixture consists of an in-memory MySQL stand-in (:mod:`.mysql_stub`),
a deliberately flawed PHP-style sanitization library (:mod:`.sanitize`),
and a small HTTP forum application (:mod:`.app`) wired together through
the package's own database client, so scans can run end to end without
any external services.
"""

from __future__ import annotations
