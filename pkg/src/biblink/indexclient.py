"""Client for an academic-index ``/evaluate`` endpoint.

The client paces requests, retries transient failures with exponential
backoff, caches raw responses per expression and counts billable
transactions. Clock, sleep and transport are injectable so tests can run on
virtual time without a network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol

from .matcher import CandidateResult

__all__ = [
    "ATTRIBUTES",
    "COST_PER_1000",
    "BudgetExhaustedError",
    "ClientConfig",
    "HttpxTransport",
    "IndexClient",
    "IndexClientError",
    "MalformedResponseError",
    "RateLimiter",
    "TransactionLedger",
    "VirtualClock",
    "evaluate",
    "ledger_report",
    "parse_entities",
]

logger = logging.getLogger(__name__)

ATTRIBUTES = ("Ti", "Y", "AA.AuN", "J.JN", "E.DOI", "CC", "Id")
COST_PER_1000 = 0.22
API_KEY_HEADER = "Ocp-Apim-Subscription-Key"


class IndexClientError(Exception):
    pass


class BudgetExhaustedError(IndexClientError):
    pass


class MalformedResponseError(IndexClientError):
    def __init__(self, message: str, body: str):
        super().__init__(message)
        self.body = body


class HTTPStatusError(IndexClientError):
    def __init__(self, status: int, body: str):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


@dataclass(frozen=True)
class ClientConfig:
    base_url: str
    api_key: str = field(default="", repr=False)
    queries_per_second: float = 1.0
    max_retries: int = 3
    per_query_count: int = 10
    monthly_budget: int | None = None
    attributes: tuple[str, ...] = ATTRIBUTES
    cache_dir: str | None = None
    backoff_seconds: float = 1.0
    timeout: float = 30.0

    def __post_init__(self):
        if not self.queries_per_second > 0:
            raise ValueError("queries_per_second must be > 0")
        if self.per_query_count < 1:
            raise ValueError("per_query_count must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.monthly_budget is not None and self.monthly_budget < 0:
            raise ValueError("monthly_budget must be >= 0")


class TransactionLedger:
    """Thread-safe count of billable transactions against an optional budget."""

    def __init__(self, budget: int | None = None, used: int = 0):
        self._lock = threading.Lock()
        self.budget = budget
        self._used = used

    @property
    def used(self) -> int:
        return self._used

    @property
    def remaining(self) -> int | None:
        return None if self.budget is None else self.budget - self._used

    def reserve(self) -> None:
        """Take one transaction or raise :class:`BudgetExhaustedError`."""
        with self._lock:
            if self.budget is not None and self._used >= self.budget:
                raise BudgetExhaustedError(
                    f"transaction budget of {self.budget} exhausted")
            self._used += 1


def ledger_report(ledger: TransactionLedger, rate_per_1000: float = COST_PER_1000) -> dict:
    return {
        "used": ledger.used,
        "remaining": ledger.remaining,
        "estimated_cost": ledger.used * rate_per_1000 / 1000,
    }


class VirtualClock:
    """A clock whose ``sleep`` advances time instantly."""

    def __init__(self, start: float = 0.0):
        self._now = start
        self._lock = threading.Lock()

    def now(self) -> float:
        return self._now

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            with self._lock:
                self._now += seconds


class RateLimiter:
    """Spaces acquisitions at least ``1/rate`` seconds apart (burst of one)."""

    def __init__(self, rate: float, clock: Callable[[], float], sleep: Callable[[float], None]):
        self.interval = 1.0 / rate
        self.clock = clock
        self.sleep = sleep
        self._next = None
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            now = self.clock()
            slot = now if self._next is None else max(now, self._next)
            self._next = slot + self.interval
        self.sleep(slot - now)


class Transport(Protocol):
    def __call__(self, url: str, params: Mapping[str, str],
                 headers: Mapping[str, str]) -> tuple[int, str]: ...


class HttpxTransport:
    def __init__(self, timeout: float = 30.0):
        import httpx

        self._client = httpx.Client(timeout=timeout)

    def __call__(self, url, params, headers):
        import httpx

        try:
            resp = self._client.get(url, params=params, headers=headers)
        except httpx.HTTPError as exc:
            # surfaced as a retryable 5xx
            return 599, str(exc)
        return resp.status_code, resp.text

    def close(self) -> None:
        self._client.close()


def _entity_to_candidate(entity: Mapping) -> CandidateResult:
    authors = entity.get("AA") or []
    journal = entity.get("J") or {}
    extended = entity.get("E") or {}
    if isinstance(extended, str):
        extended = json.loads(extended)
    year = entity.get("Y")
    return CandidateResult(
        entity_id=str(entity["Id"]),
        title=entity.get("Ti") or "",
        pub_year=int(year) if year is not None else None,
        first_author=authors[0].get("AuN") if authors else None,
        journal_name=journal.get("JN"),
        doi=extended.get("DOI"),
        citation_count=int(entity.get("CC") or 0),
    )


def parse_entities(body: str) -> list[CandidateResult]:
    """Parse an ``{"entities": [...]}`` response body."""
    try:
        data = json.loads(body)
        entities = data["entities"]
        return [_entity_to_candidate(e) for e in entities]
    except (ValueError, KeyError, TypeError, AttributeError, IndexError) as exc:
        raise MalformedResponseError(f"malformed response: {exc}", body) from exc


class IndexClient:
    def __init__(
        self,
        config: ClientConfig,
        transport: Transport | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
        ledger: TransactionLedger | None = None,
    ):
        self.config = config
        self.transport = transport or HttpxTransport(config.timeout)
        self.sleep = sleep
        self.limiter = RateLimiter(config.queries_per_second, clock, sleep)
        self.ledger = ledger or TransactionLedger(config.monthly_budget)
        self.network_calls = 0
        self.cache_hits = 0
        self._memory: dict[str, str] = {}
        self._lock = threading.Lock()
        self._inflight: dict[str, threading.Lock] = {}
        self._cache_dir = Path(config.cache_dir) if config.cache_dir else None
        if self._cache_dir:
            self._cache_dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def cache_key(expr: str) -> str:
        return hashlib.sha256(expr.encode("utf-8")).hexdigest()

    def _cache_get(self, key: str) -> str | None:
        with self._lock:
            if key in self._memory:
                return self._memory[key]
        if self._cache_dir:
            path = self._cache_dir / f"{key}.json"
            if path.exists():
                body = path.read_text(encoding="utf-8")
                with self._lock:
                    self._memory[key] = body
                return body
        return None

    def _cache_put(self, key: str, body: str) -> None:
        with self._lock:
            self._memory[key] = body
        if self._cache_dir:
            fd, tmp = tempfile.mkstemp(dir=self._cache_dir, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(body)
            os.replace(tmp, self._cache_dir / f"{key}.json")

    def _fetch(self, expr: str) -> str:
        cfg = self.config
        params = {
            "expr": expr,
            "count": str(cfg.per_query_count),
            "attributes": ",".join(cfg.attributes),
        }
        headers = {API_KEY_HEADER: cfg.api_key} if cfg.api_key else {}
        url = cfg.base_url.rstrip("/") + "/evaluate"
        for attempt in range(cfg.max_retries + 1):
            self.limiter.acquire()
            with self._lock:
                self.network_calls += 1
            status, body = self.transport(url, params, headers)
            if status == 200:
                return body
            if status != 429 and status < 500:
                raise HTTPStatusError(status, body)
            if attempt == cfg.max_retries:
                raise HTTPStatusError(status, body)
            delay = cfg.backoff_seconds * 2 ** attempt
            logger.warning("HTTP %s for %s; retrying in %.1fs", status, expr, delay)
            self.sleep(delay)
        raise AssertionError("unreachable")

    def evaluate_raw(self, expr: str) -> str:
        """Return the raw response body for ``expr``, from cache if possible."""
        key = self.cache_key(expr)
        body = self._cache_get(key)
        if body is not None:
            with self._lock:
                self.cache_hits += 1
            return body
        with self._lock:
            gate = self._inflight.setdefault(key, threading.Lock())
        with gate:
            # another thread may have fetched it while we waited
            body = self._cache_get(key)
            if body is not None:
                with self._lock:
                    self.cache_hits += 1
                return body
            self.ledger.reserve()
            body = self._fetch(expr)
            parse_entities(body)  # never cache a malformed body
            self._cache_put(key, body)
            return body

    def evaluate(self, expr: str) -> list[CandidateResult]:
        return parse_entities(self.evaluate_raw(expr))


def evaluate(config: ClientConfig, expr: str, **kwargs) -> list[CandidateResult]:
    """One-shot evaluation with a fresh client."""
    return IndexClient(config, **kwargs).evaluate(expr)
