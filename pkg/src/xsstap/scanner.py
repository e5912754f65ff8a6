"""Scan orchestration.

For each corpus request the scanner records which stored values the page
fetches, prunes fetch groups that cannot appear in the response, then
replays the request once per injection point: HTTP parameters get the
payload spliced into the request, database groups get it substituted into
the result set on the wire.  Every recovered reflection is located in the
rendered document and judged against its syntactic context.
"""

from __future__ import annotations

import dataclasses
import logging
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence

from .browser import SyntaxNode, compute_contexts
from .control import ControlClient, ControlError
from .httpmodel import (
    NETWORK_ERRORS,
    RequestTemplate,
    Response,
    mutate_body_param,
    mutate_cookie,
    mutate_header,
    mutate_query_param,
    replay,
)
from .intercept import FetchEvent, InjectionSpec, ProxyMode
from .payloads import (
    Payload,
    PlaceholderAllocator,
    derive_pattern,
    find_matches,
    payload_stream,
    prefix_probe,
    substitute_placeholders,
)
from .verifier import Outcome, verify

__all__ = [
    "FetchGroup",
    "Finding",
    "Granularity",
    "InjectionPoint",
    "MUTABLE_HEADERS",
    "PointKind",
    "ScanConfig",
    "ScanError",
    "ScanReport",
    "group_fetches",
    "http_points",
    "run_scan",
]

log = logging.getLogger(__name__)

# request headers worth injecting into; anything else (Host, Content-Type,
# ...) would change how the request itself is routed or parsed
MUTABLE_HEADERS = ("Referer", "User-Agent")


class ScanError(RuntimeError):
    """The scan could not run or had to stop early."""


class Granularity(Enum):
    """How finely recorded fetches are split into injection groups.

    Each level merges the groups of the previous one, trading scan time
    for the chance that two merged fetches mask each other's reflection.
    """

    INDIVIDUAL_FETCH = "individual"
    TABLE_COLUMN = "table-column"
    TABLE = "table"
    ALL = "all"


class PointKind(Enum):
    QUERY_PARAM = "query-param"
    BODY_PARAM = "body-param"
    COOKIE = "cookie"
    HEADER = "header"
    DB_FETCH_GROUP = "db-fetch-group"


@dataclass(frozen=True)
class InjectionPoint:
    """One slot a payload can be put into for a given request."""

    kind: PointKind
    name: Optional[str] = None  # parameter, cookie, or header name
    table: Optional[str] = None  # fetch groups only
    column: Optional[str] = None
    value: Optional[bytes] = None

    def describe(self) -> str:
        if self.kind is PointKind.QUERY_PARAM:
            return f"query parameter {self.name!r}"
        if self.kind is PointKind.BODY_PARAM:
            return f"form field {self.name!r}"
        if self.kind is PointKind.COOKIE:
            return f"cookie {self.name!r}"
        if self.kind is PointKind.HEADER:
            return f"header {self.name!r}"
        parts = [self.table or "*", self.column or "*"]
        locator = ".".join(parts)
        if self.value is not None:
            locator += "=" + self.value.decode("utf-8", "replace")
        return f"stored value {locator}"


@dataclass(frozen=True)
class FetchGroup:
    """Recorded fetches that one injection pass will rewrite together."""

    point: InjectionPoint
    spec: InjectionSpec
    values: tuple[bytes, ...]


def group_fetches(
    events: Sequence[FetchEvent], granularity: Granularity
) -> list[FetchGroup]:
    """Partition recorded fetch events into injection groups.

    Groups come out in first-seen order.  Events from queries that name no
    base table group by their remaining key parts; their specs then match
    by column and value only.
    """
    buckets: dict[tuple, list[bytes]] = {}
    specs: dict[tuple, tuple[InjectionSpec, InjectionPoint]] = {}
    for event in events:
        if granularity is Granularity.INDIVIDUAL_FETCH:
            key = (event.table, event.column, event.value)
            spec = InjectionSpec(table=event.table, column=event.column, value=event.value)
            point = InjectionPoint(
                PointKind.DB_FETCH_GROUP,
                table=event.table,
                column=event.column,
                value=event.value,
            )
        elif granularity is Granularity.TABLE_COLUMN:
            key = (event.table, event.column)
            spec = InjectionSpec(table=event.table, column=event.column)
            point = InjectionPoint(
                PointKind.DB_FETCH_GROUP, table=event.table, column=event.column
            )
        elif granularity is Granularity.TABLE:
            key = (event.table,)
            spec = InjectionSpec(table=event.table)
            point = InjectionPoint(PointKind.DB_FETCH_GROUP, table=event.table)
        else:
            key = ()
            spec = InjectionSpec()
            point = InjectionPoint(PointKind.DB_FETCH_GROUP)
        if key not in buckets:
            buckets[key] = []
            specs[key] = (spec, point)
        if event.value not in buckets[key]:
            buckets[key].append(event.value)
    return [
        FetchGroup(point=specs[key][1], spec=specs[key][0], values=tuple(values))
        for key, values in buckets.items()
    ]


def http_points(template: RequestTemplate) -> list[InjectionPoint]:
    """Enumerate the request's own injectable slots, each name once."""
    points: list[InjectionPoint] = []
    seen: set[tuple[PointKind, str]] = set()

    def add(kind: PointKind, name: str) -> None:
        if (kind, name) not in seen:
            seen.add((kind, name))
            points.append(InjectionPoint(kind, name=name))

    for name, _ in template.query_params():
        add(PointKind.QUERY_PARAM, name)
    for name, _ in template.body_params():
        add(PointKind.BODY_PARAM, name)
    for name, _ in template.cookie_params():
        add(PointKind.COOKIE, name)
    for header in MUTABLE_HEADERS:
        if template.header(header) is not None:
            add(PointKind.HEADER, header)
    return points


def _apply_mutation(
    template: RequestTemplate, point: InjectionPoint, payload: bytes
) -> RequestTemplate:
    if point.kind is PointKind.QUERY_PARAM:
        return mutate_query_param(template, point.name, payload)
    if point.kind is PointKind.BODY_PARAM:
        return mutate_body_param(template, point.name, payload)
    if point.kind is PointKind.COOKIE:
        return mutate_cookie(template, point.name, payload)
    if point.kind is PointKind.HEADER:
        return mutate_header(template, point.name, payload)
    raise ValueError(f"{point.kind} is not an HTTP mutation")


@dataclass(frozen=True)
class Finding:
    """One incorrectly sanitized reflection."""

    request_id: str
    point: InjectionPoint
    payload_id: str
    payload: bytes  # raw bytes as injected
    matched: bytes  # encoded reflection as found in the response
    chain: tuple[SyntaxNode, ...]
    outcome: Outcome
    failing_node: Optional[int]
    evidence: Optional[bytes]
    response_status: int


def _zero_flaw_counts() -> dict[str, int]:
    return {
        Outcome.FLAW_ARBITRARY_JS.value: 0,
        Outcome.FLAW_POSSIBLY_ARBITRARY_JS.value: 0,
        Outcome.FLAW_NO_JS_EXECUTION.value: 0,
        Outcome.FLAW_MANUAL_ANALYSIS.value: 0,
    }


def _zero_counters() -> dict[str, int]:
    return {
        "http_requests_sent": 0,
        "fetch_events_recorded": 0,
        "groups_pruned": 0,
        "templates_scanned": 0,
        "templates_skipped": 0,
        "templates_failed": 0,
        "server_errors": 0,
        "network_errors": 0,
    }


@dataclass
class ScanReport:
    granularity: Granularity
    seed: int
    findings: list[Finding] = field(default_factory=list)
    correct_sanitizations: int = 0
    flaw_counts: dict[str, int] = field(default_factory=_zero_flaw_counts)
    counters: dict[str, int] = field(default_factory=_zero_counters)
    wall_time_seconds: float = 0.0
    aborted: bool = False
    abort_reason: Optional[str] = None


@dataclass
class ScanConfig:
    target: tuple[str, int]
    control: tuple[str, int]
    granularity: Granularity = Granularity.INDIVIDUAL_FETCH
    seed: int = 0
    timeout: float = 10.0
    prune: bool = True
    login: tuple[RequestTemplate, ...] = ()
    reauth_statuses: frozenset[int] = frozenset({401, 403})
    skip_urls: tuple[str, ...] = ()
    control_token: Optional[str] = None


class _ControlLost(Exception):
    pass


class _ScanRun:
    def __init__(self, templates: Sequence[RequestTemplate], config: ScanConfig) -> None:
        self.templates = templates
        self.config = config
        self.payloads: Iterator[Payload] = payload_stream(config.seed)
        self.report = ScanReport(granularity=config.granularity, seed=config.seed)
        self.session: dict[str, str] = {}
        self._mode = ProxyMode.PASSTHROUGH
        self.control: Optional[ControlClient] = None

    # -- control-channel plumbing ------------------------------------

    def _guard(self, fn, *args):
        """Control failures abort the scan; tag them distinctly."""
        try:
            return fn(*args)
        except (ControlError, OSError) as exc:
            raise _ControlLost(f"control channel failed: {exc}") from exc

    def _set_mode(self, mode: ProxyMode) -> None:
        if mode is not self._mode:
            self._guard(self.control.set_mode, mode)
            self._mode = mode

    # -- HTTP plumbing ------------------------------------------------

    def _transmit(self, template: RequestTemplate) -> Optional[Response]:
        try:
            response = replay(
                template,
                self.config.target,
                self.config.timeout,
                cookie_overrides=self.session or None,
            )
        except NETWORK_ERRORS as exc:
            self.report.counters["network_errors"] += 1
            log.warning("request %s failed: %s", template.id, exc)
            return None
        self.report.counters["http_requests_sent"] += 1
        return response

    def _send(self, template: RequestTemplate) -> Optional[Response]:
        response = self._transmit(template)
        if (
            response is not None
            and self.config.login
            and response.status in self.config.reauth_statuses
        ):
            self._login()
            response = self._transmit(template)
        return response

    def _login(self) -> None:
        """Run the configured login sequence, harvesting session cookies."""
        suspended = self._mode if self._mode is not ProxyMode.PASSTHROUGH else None
        if suspended is not None:
            self._set_mode(ProxyMode.PASSTHROUGH)
        for template in self.config.login:
            response = self._transmit(template)
            if response is None:
                continue
            for key, value in response.headers:
                if key.lower() != "set-cookie":
                    continue
                crumb = value.split(";", 1)[0]
                name, sep, val = crumb.partition("=")
                if sep:
                    self.session[name.strip()] = val.strip()
        if suspended is not None:
            self._set_mode(suspended)

    # -- analysis -----------------------------------------------------

    def _assess(
        self,
        template: RequestTemplate,
        point: InjectionPoint,
        payload: Payload,
        response: Optional[Response],
    ) -> None:
        if response is None:
            return
        if 500 <= response.status < 600:
            self.report.counters["server_errors"] += 1
            log.warning(
                "request %s got %d while injecting into %s; skipping analysis",
                template.id,
                response.status,
                point.describe(),
            )
            return
        matches = find_matches(response.body, [derive_pattern(payload)])
        if not matches:
            return
        doc, mapping = substitute_placeholders(
            response.body, matches, PlaceholderAllocator()
        )
        contexts = compute_contexts(doc, [token for token, _ in mapping])
        by_token = {ctx.placeholder: ctx for ctx in contexts}
        for token, match in mapping:
            verdict = verify(match.data, by_token[token])
            if verdict.outcome is Outcome.CORRECT_SANITIZATION:
                self.report.correct_sanitizations += 1
                continue
            self.report.flaw_counts[verdict.outcome.value] += 1
            self.report.findings.append(
                Finding(
                    request_id=template.id,
                    point=point,
                    payload_id=payload.identifier,
                    payload=payload.encode(),
                    matched=match.data,
                    chain=by_token[token].chain,
                    outcome=verdict.outcome,
                    failing_node=verdict.failing_node,
                    evidence=verdict.evidence,
                    response_status=response.status,
                )
            )

    # -- per-template flow ---------------------------------------------

    def _prune(
        self, groups: list[FetchGroup], baseline_body: bytes
    ) -> list[FetchGroup]:
        kept = []
        for group in groups:
            probes = [prefix_probe(v) for v in group.values]
            conclusive = all(p is not None for p in probes)
            if not conclusive or any(p.search(baseline_body) for p in probes):
                kept.append(group)
            else:
                self.report.counters["groups_pruned"] += 1
        return kept

    def _scan_template(self, template: RequestTemplate) -> None:
        self._guard(self.control.clear)
        self._set_mode(ProxyMode.RECORDING)
        baseline = self._send(template)
        self._set_mode(ProxyMode.PASSTHROUGH)
        events = self._guard(self.control.get_events)
        self.report.counters["fetch_events_recorded"] += len(events)
        if baseline is None:
            self.report.counters["templates_failed"] += 1
            return
        self.report.counters["templates_scanned"] += 1

        groups = group_fetches(events, self.config.granularity)
        if self.config.prune:
            groups = self._prune(groups, baseline.body)

        for point in http_points(template):
            payload = next(self.payloads)
            mutated = _apply_mutation(template, point, payload.encode())
            self._assess(template, point, payload, self._send(mutated))

        for group in groups:
            payload = next(self.payloads)
            spec = dataclasses.replace(group.spec, payload=payload.encode())
            self._guard(self.control.set_specs, [spec])
            self._set_mode(ProxyMode.INJECTING)
            response = self._send(template)
            self._set_mode(ProxyMode.PASSTHROUGH)
            self._guard(self.control.set_specs, [])
            self._assess(template, group.point, payload, response)

    def run(self) -> ScanReport:
        start = time.monotonic()
        try:
            self.control = ControlClient(
                *self.config.control,
                timeout=self.config.timeout,
                token=self.config.control_token,
            )
        except OSError as exc:
            raise ScanError(f"cannot reach control endpoint: {exc}") from exc
        try:
            try:
                if self.config.login:
                    self._login()
                for template in self.templates:
                    if any(re.search(p, template.url) for p in self.config.skip_urls):
                        self.report.counters["templates_skipped"] += 1
                        continue
                    self._scan_template(template)
            except _ControlLost as exc:
                self.report.aborted = True
                self.report.abort_reason = str(exc)
                log.error("scan aborted: %s", exc)
            finally:
                # best effort: leave the relay transparent
                try:
                    self.control.set_specs([])
                    self.control.set_mode(ProxyMode.PASSTHROUGH)
                except (ControlError, OSError):
                    pass
                self.control.close()
        finally:
            self.report.wall_time_seconds = time.monotonic() - start
        return self.report


def run_scan(
    templates: Sequence[RequestTemplate], config: ScanConfig
) -> ScanReport:
    """Scan every corpus request and return the collected report.

    Raises ScanError when the control endpoint cannot be reached at all; a
    control failure mid-scan instead returns the partial report with
    ``aborted`` set.
    """
    return _ScanRun(templates, config).run()
