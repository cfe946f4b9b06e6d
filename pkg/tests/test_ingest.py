import io
import json
import random

import pytest

from moocteams.errors import DataFormatError, ParameterError
from moocteams.ingest import (
    ForumMessage,
    ReplyPolicy,
    SynthParams,
    build_reply_graph,
    parse_forum_export,
    synth_corpus,
    write_jsonl,
)


def _line(**kw):
    rec = {"id": "m1", "thread_id": "t1", "timestamp": 100, "body": "hi"}
    rec.update(kw)
    return json.dumps(rec)


def test_parse_basic():
    stream = io.StringIO("\n".join([
        _line(id="m1", author="alice"),
        _line(id="m2", author=None, parent_id="m1"),
        "",
        _line(id="m3", author="bob", parent_id="m1"),
    ]) + "\n")
    result = parse_forum_export(stream)
    assert result.parsed == 3
    assert result.skipped == 0
    assert result.anonymous == 1
    assert result.messages[0] == ForumMessage(
        id="m1", thread_id="t1", timestamp=100, body="hi", author="alice")


def test_parse_skips_malformed_and_duplicates():
    stream = io.StringIO("\n".join([
        _line(id="m1", author="a"),
        "not json at all",
        _line(id="m1", author="b"),              # duplicate id
        _line(id="m2", author="c", timestamp=-5),  # bad timestamp
        _line(id="m3", author="d"),
        _line(id="m4", author="e"),
        _line(id="m5", author="f"),
    ]))
    result = parse_forum_export(stream)
    assert result.parsed == 4
    assert result.skipped == 3
    assert [m.id for m in result.messages] == ["m1", "m3", "m4", "m5"]


def test_parse_mostly_garbage_raises():
    stream = io.StringIO("junk\nmore junk\n" + _line() + "\n")
    with pytest.raises(DataFormatError):
        parse_forum_export(stream)


def test_parse_accepts_bytes_lines():
    stream = io.BytesIO((_line(author="a") + "\n").encode())
    assert parse_forum_export(stream).parsed == 1


def test_jsonl_round_trip():
    msgs = [
        ForumMessage(id="m1", thread_id="t1", timestamp=5, body="x", author="a"),
        ForumMessage(id="m2", thread_id="t1", timestamp=6, parent_id="m1"),
    ]
    buf = io.StringIO()
    write_jsonl(msgs, buf)
    buf.seek(0)
    assert parse_forum_export(buf).messages == msgs


def _thread(*, policy=ReplyPolicy.STARTER_FALLBACK):
    msgs = [
        ForumMessage(id="p1", thread_id="t1", timestamp=1, author="ann"),
        ForumMessage(id="p2", thread_id="t1", timestamp=2, author="bob"),
        ForumMessage(id="c1", thread_id="t1", timestamp=3, parent_id="p2", author="cid"),
        ForumMessage(id="c2", thread_id="t1", timestamp=4, parent_id="p2", author="cid"),
        ForumMessage(id="c3", thread_id="t1", timestamp=5, parent_id="c1", author="bob"),
    ]
    return build_reply_graph(msgs, policy=policy)


def test_reply_graph_starter_fallback():
    g, report = _thread()
    # p2 has no parent, so it replies to the thread starter's author
    assert g.weight("bob", "ann") == 1
    assert g.weight("cid", "bob") == 2
    assert g.weight("bob", "cid") == 1
    assert report.interactions == 4


def test_reply_graph_comments_only():
    g, report = _thread(policy=ReplyPolicy.COMMENTS_ONLY)
    assert g.weight("bob", "ann") == 0
    assert g.weight("cid", "bob") == 2
    assert report.interactions == 3


def test_reply_graph_drops_anonymous_and_self_replies():
    msgs = [
        ForumMessage(id="p1", thread_id="t1", timestamp=1, author="ann"),
        ForumMessage(id="c1", thread_id="t1", timestamp=2, parent_id="p1", author=None),
        ForumMessage(id="c2", thread_id="t1", timestamp=3, parent_id="p1", author="ann"),
        ForumMessage(id="c3", thread_id="t1", timestamp=4, parent_id="ghost", author="bob"),
    ]
    g, report = build_reply_graph(msgs)
    assert g.edge_count == 0
    assert report.dropped_anonymous == 1
    assert report.dropped_self_reply == 1
    assert report.dropped_missing_parent == 1
    # named authors stay in the graph even with no surviving interactions
    assert g.nodes == ("ann", "bob")


def test_reply_graph_is_order_independent():
    msgs = synth_corpus(SynthParams(students=12, threads=4, posts=20, comments=40, seed=9))
    g1, _ = build_reply_graph(msgs)
    shuffled = list(msgs)
    random.Random(0).shuffle(shuffled)
    g2, _ = build_reply_graph(shuffled)
    assert g1 == g2


def test_synth_corpus_deterministic_and_sized():
    params = SynthParams(students=30, threads=10, posts=50, comments=120, seed=4)
    msgs = synth_corpus(params)
    assert msgs == synth_corpus(params)
    assert sum(1 for m in msgs if m.parent_id is None) == 50
    assert sum(1 for m in msgs if m.parent_id is not None) == 120
    assert len({m.id for m in msgs}) == 170
    # parents always precede children
    seen = set()
    for m in msgs:
        assert m.parent_id is None or m.parent_id in seen
        seen.add(m.id)


def test_synth_corpus_covers_every_student():
    params = SynthParams(students=25, threads=8, posts=40, comments=60, seed=1,
                         anonymous_fraction=0.1)
    msgs = synth_corpus(params)
    named = {m.author for m in msgs if m.author is not None}
    assert named == {f"s{i:05d}" for i in range(25)}


def test_synth_corpus_validates():
    with pytest.raises(ParameterError):
        synth_corpus(SynthParams(students=5, threads=1, posts=0, comments=3, seed=0))
    with pytest.raises(ParameterError):
        synth_corpus(SynthParams(students=5, threads=1, posts=2, comments=3, seed=0,
                                 anonymous_fraction=1.5))
