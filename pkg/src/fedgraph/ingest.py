"""Data acquisition: edge-list files, identifier anonymization, and a small
Mastodon-compatible follower/following crawler.

The crawler only requests relation endpoints and never parses or stores
any status content.
"""
from __future__ import annotations

import csv
import gzip
import hashlib
import hmac
import json
import logging
import os
import re
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import httpx

from .graph import GraphError

log = logging.getLogger(__name__)

HEADER = ("source_user", "source_instance", "target_user", "target_instance")
DIGEST_CHARS = 16


class EdgeListError(GraphError):
    pass


def _open_binary(path):
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def iter_edge_list(lines: Iterable[bytes]) -> Iterator[tuple[str, str, str, str]]:
    """Parse edge-list lines (bytes) after validating the header."""
    header_seen = False
    for lineno, raw in enumerate(lines, start=1):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EdgeListError(f"undecodable bytes ({exc.reason})", lineno) from None
        if lineno == 1 and text.startswith("\ufeff"):
            text = text[1:]
        text = text.rstrip("\r\n")
        if not header_seen:
            if tuple(f.strip() for f in next(csv.reader([text]), [])) != HEADER:
                raise EdgeListError(f"missing header {','.join(HEADER)}", lineno)
            header_seen = True
            continue
        if not text.strip():
            continue
        row = next(csv.reader([text]))
        if len(row) != 4:
            raise EdgeListError(f"expected 4 fields, got {len(row)}", lineno)
        if any(not f for f in row):
            raise EdgeListError("empty field", lineno)
        yield tuple(row)
    if not header_seen:
        raise EdgeListError(f"missing header {','.join(HEADER)}", 1)


def read_edge_list(path) -> Iterator[tuple[str, str, str, str]]:
    """Stream ``(src_user, src_instance, dst_user, dst_instance)`` records.

    Plain or gzip-compressed UTF-8 CSV with the standard header; errors carry
    the offending line number.
    """
    with _open_binary(path) as fh:
        yield from iter_edge_list(fh)


def write_edge_list(records: Iterable[Sequence[str]], path_or_file) -> int:
    """Write records as an edge-list CSV (gzip when the path ends in ``.gz``)."""
    if hasattr(path_or_file, "write"):
        return _write_rows(records, path_or_file)
    path = Path(path_or_file)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", encoding="utf-8", newline="") as fh:
        return _write_rows(records, fh)


def _write_rows(records, fh) -> int:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(HEADER)
    n = 0
    for rec in records:
        writer.writerow(rec)
        n += 1
    return n


def anonymize(records: Iterable[Sequence[str]], salt: str | bytes) -> list[tuple[str, str, str, str]]:
    """Replace user identifiers by a keyed hash; instance names are kept.

    The digest is HMAC-SHA256 keyed with ``salt``, truncated to 16 hex
    characters (64 bits). For n distinct users the chance of any collision
    is about n**2 / 2**65, i.e. below 1e-7 for 1.5 million users.
    """
    if not salt:
        raise ValueError("salt must be non-empty")
    key = salt.encode("utf-8") if isinstance(salt, str) else bytes(salt)
    cache: dict[str, str] = {}

    def digest(user: str) -> str:
        h = cache.get(user)
        if h is None:
            h = hmac.new(key, user.encode("utf-8"), hashlib.sha256).hexdigest()[:DIGEST_CHARS]
            cache[user] = h
        return h

    return [(digest(su), si, digest(du), di) for su, si, du, di in records]


# -- crawler ---------------------------------------------------------------

@dataclass
class CrawlConfig:
    seed_instances: Sequence[str] = ()
    seed_accounts: Sequence[str] = ()
    rate_limit: float = 1.0
    max_users: int = 1000
    token_env: str | None = "MASTODON_TOKEN"
    timeout: float = 10.0
    max_retries: int = 3
    backoff: float = 1.0
    page_limit: int = 80
    directory_limit: int = 40
    checkpoint: str | None = None
    instance_urls: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.rate_limit > 0:
            raise ValueError("rate_limit must be positive")
        if self.max_users < 1:
            raise ValueError("max_users must be >= 1")
        if not self.seed_instances and not self.seed_accounts:
            raise ValueError("need at least one seed instance or account")

    def base_url(self, instance: str) -> str:
        return self.instance_urls.get(instance, f"https://{instance}").rstrip("/")


class RateLimiter:
    """Minimum spacing between requests, tracked per instance."""

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.interval = 1.0 / rate
        self.clock = clock
        self.sleep = sleep
        self._last: dict[str, float] = {}

    def wait(self, instance: str) -> None:
        last = self._last.get(instance)
        if last is not None:
            delay = last + self.interval - self.clock()
            if delay > 0:
                self.sleep(delay)
        self._last[instance] = self.clock()


class CrawlError(RuntimeError):
    pass


_LINK_NEXT = re.compile(r'<([^>]+)>\s*;\s*rel="?next"?')


def _split_acct(acct: str, home: str) -> tuple[str, str]:
    acct = acct.lstrip("@")
    if "@" in acct:
        user, instance = acct.split("@", 1)
        return user, instance
    return acct, home


class Crawler:
    """Breadth-first crawl over follower/following lists.

    Accounts are ``(username, instance)`` pairs. Each visited account
    contributes its follow relations in both directions as edge records.
    Progress is appended to a newline-delimited JSON checkpoint so a crawl
    can resume after a crash.
    """

    def __init__(self, cfg: CrawlConfig, client: httpx.Client | None = None,
                 limiter: RateLimiter | None = None):
        self.cfg = cfg
        self.client = client or httpx.Client(timeout=cfg.timeout, follow_redirects=True)
        self.limiter = limiter or RateLimiter(cfg.rate_limit)
        token = os.environ.get(cfg.token_env) if cfg.token_env else None
        self.headers = {"Authorization": f"Bearer {token}"} if token else {}
        self.rejected: set[str] = set()
        self.request_count = 0

    def _get(self, instance: str, url: str, params: dict | None = None) -> httpx.Response | None:
        if instance in self.rejected:
            return None
        for attempt in range(self.cfg.max_retries + 1):
            self.limiter.wait(instance)
            self.request_count += 1
            try:
                resp = self.client.get(url, params=params, headers=self.headers)
            except httpx.HTTPError as exc:
                status, reason, retry_after = None, str(exc), None
            else:
                if resp.status_code in (401, 403):
                    log.warning("auth rejected by %s (HTTP %d); skipping instance",
                                instance, resp.status_code)
                    self.rejected.add(instance)
                    return None
                if resp.status_code < 400:
                    return resp
                status, reason = resp.status_code, resp.reason_phrase
                retry_after = resp.headers.get("Retry-After")
                if status < 500 and status != 429:
                    log.warning("GET %s failed with HTTP %d; skipping", url, status)
                    return None
            if attempt == self.cfg.max_retries:
                break
            delay = self.cfg.backoff * 2 ** attempt
            if retry_after is not None:
                try:
                    delay = max(delay, float(retry_after))
                except ValueError:
                    pass
            log.info("retry %d for %s after %s (%s); waiting %.2fs",
                     attempt + 1, url, status or "error", reason, delay)
            self.limiter.sleep(delay)
        log.warning("giving up on %s after %d retries", url, self.cfg.max_retries)
        return None

    def _paged(self, instance: str, url: str) -> Iterator[dict]:
        params = {"limit": self.cfg.page_limit}
        while url:
            resp = self._get(instance, url, params)
            if resp is None:
                return
            for item in resp.json():
                yield item
            match = _LINK_NEXT.search(resp.headers.get("Link", ""))
            url = match.group(1) if match else None
            params = None

    def lookup(self, user: str, instance: str) -> str | None:
        resp = self._get(instance, f"{self.cfg.base_url(instance)}/api/v1/accounts/lookup",
                         {"acct": user})
        return None if resp is None else str(resp.json()["id"])

    def directory(self, instance: str) -> list[tuple[str, str]]:
        """Seed users listed in an instance's public profile directory."""
        resp = self._get(instance, f"{self.cfg.base_url(instance)}/api/v1/directory",
                         {"local": "true", "limit": self.cfg.directory_limit})
        if resp is None:
            return []
        return [_split_acct(a["acct"], instance) for a in resp.json()]

    def relations(self, user: str, instance: str) -> list[tuple] | None:
        """``(follower, followee)`` account pairs touching one account, or None if unreachable."""
        account_id = self.lookup(user, instance)
        if account_id is None:
            return None
        base = f"{self.cfg.base_url(instance)}/api/v1/accounts/{account_id}"
        me = (user, instance)
        pairs = [(_split_acct(item["acct"], instance), me)
                 for item in self._paged(instance, f"{base}/followers")]
        pairs += [(me, _split_acct(item["acct"], instance))
                  for item in self._paged(instance, f"{base}/following")]
        return pairs

    def _load_checkpoint(self):
        edges, done, order = [], set(), []
        path = self.cfg.checkpoint
        if not path or not Path(path).exists():
            return edges, done, order
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    log.warning("ignoring truncated checkpoint line")
                    continue
                if entry["kind"] == "edge":
                    rec = tuple(entry["record"])
                    edges.append(rec)
                    order.extend([(rec[0], rec[1]), (rec[2], rec[3])])
                elif entry["kind"] == "done":
                    done.add((entry["user"], entry["instance"]))
        return edges, done, order

    def run(self) -> list[tuple[str, str, str, str]]:
        cfg = self.cfg
        edges, done, discovered = self._load_checkpoint()
        seen_edges = set(edges)
        seeds = [_split_acct(a, "") for a in cfg.seed_accounts]
        if any(not inst for _, inst in seeds):
            raise CrawlError("seed accounts must be written user@instance")
        for instance in cfg.seed_instances:
            seeds.extend(self.directory(instance))
        if not seeds and not edges:
            raise CrawlError("no reachable seed: every seed instance failed or listed no users")
        frontier = deque()
        queued = set()
        for acct in list(seeds) + discovered:
            if acct not in queued:
                queued.add(acct)
                frontier.append(acct)
        reached = bool(done)
        sink = open(cfg.checkpoint, "a", encoding="utf-8") if cfg.checkpoint else None
        try:
            while frontier and len(done) < cfg.max_users:
                acct = frontier.popleft()
                if acct in done:
                    continue
                user, instance = acct
                if instance in self.rejected:
                    continue
                pairs = self.relations(user, instance)
                if pairs is None:
                    continue
                reached = True
                for follower, followee in pairs:
                    if follower == followee:
                        continue
                    rec = (*follower, *followee)
                    if rec not in seen_edges:
                        seen_edges.add(rec)
                        edges.append(rec)
                        if sink:
                            sink.write(json.dumps({"kind": "edge", "record": rec}) + "\n")
                    for other in (follower, followee):
                        if other not in queued:
                            queued.add(other)
                            frontier.append(other)
                done.add(acct)
                if sink:
                    sink.write(json.dumps({"kind": "done", "user": user,
                                           "instance": instance}) + "\n")
                    sink.flush()
        finally:
            if sink:
                sink.close()
        if not reached:
            raise CrawlError("no reachable seed: no account could be crawled")
        return edges


def crawl(cfg: CrawlConfig, client: httpx.Client | None = None) -> list[tuple[str, str, str, str]]:
    """Crawl follow relations breadth-first from the configured seeds."""
    return Crawler(cfg, client).run()
