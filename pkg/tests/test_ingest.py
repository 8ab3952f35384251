import gzip
import logging
import time

import httpx

import pytest

from fedgraph import build_graph, metrics
from fedgraph.ingest import (CrawlConfig, CrawlError, Crawler, EdgeListError, RateLimiter, anonymize,
                             crawl, read_edge_list, write_edge_list)

from mock_mastodon import MockFediverse

HEADER = "source_user,source_instance,target_user,target_instance\n"


def _write(tmp_path, text, name="e.csv"):
    p = tmp_path / name
    p.write_bytes(text if isinstance(text, bytes) else text.encode())
    return p


# -- edge lists ---------------------------------------------------------------

def test_three_records(tmp_path):
    p = _write(tmp_path, HEADER + "a,X,b,X\nb,X,c,Y\nc,Y,a,X\n")
    assert len(list(read_edge_list(p))) == 3


def test_header_only_file(tmp_path):
    assert list(read_edge_list(_write(tmp_path, HEADER))) == []


def test_short_row_reports_line(tmp_path):
    p = _write(tmp_path, HEADER + "a,X,b,X\na,X,b\n")
    with pytest.raises(EdgeListError) as exc:
        list(read_edge_list(p))
    assert exc.value.line == 3 and "got 3" in str(exc.value)


def test_missing_header(tmp_path):
    with pytest.raises(EdgeListError) as exc:
        list(read_edge_list(_write(tmp_path, "a,X,b,X\n")))
    assert exc.value.line == 1


def test_empty_file(tmp_path):
    with pytest.raises(EdgeListError):
        list(read_edge_list(_write(tmp_path, "")))


def test_undecodable_bytes(tmp_path):
    p = _write(tmp_path, HEADER.encode() + b"a,X,b,X\n\xff\xfe,X,b,X\n")
    with pytest.raises(EdgeListError) as exc:
        list(read_edge_list(p))
    assert exc.value.line == 3


def test_gzip_and_bom(tmp_path):
    p = tmp_path / "e.csv.gz"
    p.write_bytes(gzip.compress(("﻿" + HEADER + "a,X,b,X\r\n").encode()))
    assert list(read_edge_list(p)) == [("a", "X", "b", "X")]


def test_quoted_fields_round_trip(tmp_path):
    recs = [("a,1", "X", 'b"q', "Y.example")]
    write_edge_list(recs, tmp_path / "q.csv.gz")
    assert list(read_edge_list(tmp_path / "q.csv.gz")) == recs


# -- anonymization --------------------------------------------------------------

def test_digest_properties():
    recs = [("alice", "X", "bob", "Y")]
    a1 = anonymize(recs, "salt")
    assert a1 == anonymize(recs, "salt")
    assert a1[0][0] != anonymize(recs, "pepper")[0][0]
    assert len(a1[0][0]) == 16 and a1[0][1] == "X" and a1[0][3] == "Y"
    with pytest.raises(ValueError):
        anonymize(recs, "")


def test_anonymized_graph_is_isomorphic():
    from fedgraph import synthgen
    net = synthgen.generate(synthgen.GeneratorConfig([40, 20], mixing=[[0, 6], [6, 0]],
                                                     reciprocity=0.4, seed=6))
    raw = list(net.records())
    g1, g2 = build_graph(raw), build_graph(anonymize(raw, "k"))
    s1 = metrics.structural_summary(g1, "exact").as_dict()
    s2 = metrics.structural_summary(g2, "exact").as_dict()
    for key, v in s1.items():
        if isinstance(v, float):
            assert s2[key] == pytest.approx(v, rel=1e-12, abs=1e-15), key
        else:
            assert s2[key] == v, key


# -- crawler --------------------------------------------------------------------

def _cfg(mock, **kw):
    base = dict(seed_accounts=["a@one.test"], rate_limit=1000, max_users=100, backoff=0.01,
                timeout=5, instance_urls=mock.urls(), token_env="FEDGRAPH_TEST_TOKEN")
    base.update(kw)
    return CrawlConfig(**base)


def test_two_users_one_record():
    with MockFediverse([("a@one.test", "b@one.test")]) as mock:
        assert crawl(_cfg(mock)) == [("a", "one.test", "b", "one.test")]


def test_frontier_cap_one_fetches_only_seed_relations():
    follows = [("a@one.test", "b@one.test"), ("b@one.test", "c@two.test"),
               ("d@two.test", "a@one.test")]
    with MockFediverse(follows) as mock:
        got = crawl(_cfg(mock, max_users=1))
        assert sorted(got) == [("a", "one.test", "b", "one.test"), ("d", "two.test", "a", "one.test")]
        looked_up = [r for r in mock.requests if r[2] == "api/v1/accounts/lookup"]
        assert len(looked_up) == 1


def test_bfs_crosses_instances_and_pages():
    follows = [("a@one.test", f"u{k}@two.test") for k in range(5)] + \
              [("u1@two.test", "z@three.test")]
    with MockFediverse(follows, page_size=2) as mock:
        got = set(crawl(_cfg(mock)))
        assert got == {(a.split("@")[0], a.split("@")[1], b.split("@")[0], b.split("@")[1])
                       for a, b in follows}


def test_429_then_success_logs_exactly_one_retry(caplog):
    with MockFediverse([("a@one.test", "b@one.test")]) as mock:
        mock.failures["api/v1/accounts/1/following"] = [429]
        with caplog.at_level(logging.INFO, logger="fedgraph.ingest"):
            got = crawl(_cfg(mock))
        assert ("a", "one.test", "b", "one.test") in got
        retries = [r for r in caplog.records if r.getMessage().startswith("retry ")]
        assert len(retries) == 1


def test_persistent_failure_is_skipped(caplog):
    with MockFediverse([("a@one.test", "b@one.test"), ("c@one.test", "a@one.test")]) as mock:
        mock.failures["api/v1/accounts/1/followers"] = [503] * 10
        with caplog.at_level(logging.INFO, logger="fedgraph.ingest"):
            got = crawl(_cfg(mock, max_retries=2))
        assert ("a", "one.test", "b", "one.test") in got
        assert any("giving up" in r.getMessage() for r in caplog.records)


class RecordingLimiter(RateLimiter):
    def __init__(self, rate):
        super().__init__(rate)
        self.stamps = []

    def wait(self, instance):
        super().wait(instance)
        self.stamps.append((self._last[instance], instance))


def test_rate_limit_spacing():
    rate = 25.0
    follows = [("a@one.test", f"u{k}@one.test") for k in range(6)] + [("a@one.test", "z@two.test")]
    sent = []
    client = httpx.Client(event_hooks={"request": [lambda req: sent.append(time.monotonic())]})
    with MockFediverse(follows, page_size=1) as mock:
        limiter = RecordingLimiter(rate)
        Crawler(_cfg(mock, rate_limit=rate, max_users=3), client, limiter).run()
        arrivals = [t for t, inst, *_ in mock.requests if inst == "one.test"]
    for inst in ("one.test", "two.test"):
        stamps = [t for t, i in limiter.stamps if i == inst]
        assert all(b - a >= 1 / rate for a, b in zip(stamps, stamps[1:])), inst
    # every request passed through the limiter; wire timing only adds jitter
    assert len(sent) == len(limiter.stamps) and len(arrivals) >= 6
    assert min(b - a for a, b in zip(arrivals, arrivals[1:])) >= 1 / rate - 5e-3


def test_rate_limiter_with_fake_clock():
    now = [0.0]
    slept = []

    def sleep(dt):
        slept.append(dt)
        now[0] += dt

    lim = RateLimiter(2.0, clock=lambda: now[0], sleep=sleep)
    lim.wait("x")
    lim.wait("x")
    lim.wait("y")  # limits are per instance
    assert slept == [0.5]


def test_auth_token_and_rejection(monkeypatch, caplog):
    monkeypatch.setenv("FEDGRAPH_TEST_TOKEN", "s3cret")
    follows = [("a@one.test", "b@two.test"), ("b@two.test", "c@two.test"),
               ("a@one.test", "d@one.test")]
    with MockFediverse(follows) as mock:
        mock.rejecting.add("two.test")
        with caplog.at_level(logging.WARNING, logger="fedgraph.ingest"):
            got = crawl(_cfg(mock))
        assert all(auth == "Bearer s3cret" for *_, auth in mock.requests)
        assert sum(1 for r in mock.requests if r[1] == "two.test") == 1
    assert ("b", "two.test", "c", "two.test") not in got
    assert ("a", "one.test", "d", "one.test") in got
    assert any("auth rejected" in r.getMessage() for r in caplog.records)


def test_no_reachable_seed():
    with MockFediverse([("a@one.test", "b@one.test")]) as mock:
        mock.rejecting.add("one.test")
        with pytest.raises(CrawlError, match="no reachable seed"):
            crawl(_cfg(mock))
        with pytest.raises(CrawlError):
            crawl(_cfg(mock, seed_accounts=[], seed_instances=["one.test"]))


def test_directory_seeding():
    with MockFediverse([("a@one.test", "b@one.test")]) as mock:
        got = crawl(_cfg(mock, seed_accounts=[], seed_instances=["one.test"]))
        assert got == [("a", "one.test", "b", "one.test")]


def test_resume_from_checkpoint(tmp_path):
    follows = [("a@one.test", "b@one.test"), ("b@one.test", "c@one.test"),
               ("c@one.test", "d@two.test"), ("d@two.test", "e@two.test")]
    ck = tmp_path / "crawl.ndjson"
    with MockFediverse(follows) as mock:
        fresh = crawl(_cfg(mock, max_users=3))
        crawl(_cfg(mock, max_users=1, checkpoint=str(ck)))
        before = len(mock.requests)
        resumed = crawl(_cfg(mock, max_users=3, checkpoint=str(ck)))
        lookups = [r[2] for r in mock.requests[before:] if r[2] == "api/v1/accounts/lookup"]
    assert sorted(resumed) == sorted(fresh)
    assert len(lookups) == 2  # the seed finished before the crash is not fetched again


def test_truncated_checkpoint_line_is_ignored(tmp_path):
    ck = tmp_path / "crawl.ndjson"
    ck.write_text('{"kind": "edge", "record": ["a", "one.test", "b", "one.test"]}\n{"kind": "do')
    with MockFediverse([("a@one.test", "b@one.test")]) as mock:
        got = crawl(_cfg(mock, checkpoint=str(ck)))
    assert got == [("a", "one.test", "b", "one.test")]


@pytest.mark.parametrize("kw", [{"rate_limit": 0}, {"max_users": 0},
                                {"seed_accounts": [], "seed_instances": []}])
def test_crawl_config_validation(kw):
    with pytest.raises(ValueError):
        CrawlConfig(**{"seed_accounts": ["a@x"], **kw})
