import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FixedClock
from dataproduct_gateway.audit import (
    GENESIS_HASH,
    AuditLog,
    PayloadError,
    compute_hash,
    read_records,
    verify_chain,
)


@pytest.fixture
def log(tmp_path):
    return AuditLog(tmp_path / "audit.log", clock=FixedClock())


def fill(log, n):
    for i in range(n):
        log.append("access_requested", f"user{i % 3}", {
            "product_id": "customers" if i % 2 else "support-tickets",
            "request_id": f"ar-{i:06d}",
        })
    return log


# --- append ---------------------------------------------------------------


def test_genesis_record(log):
    record = log.append("access_requested", "alice", {"product_id": "customers"})
    assert record.seq == 0
    assert record.prev_hash == GENESIS_HASH
    assert record.hash == compute_hash(GENESIS_HASH, record.body())


def test_chain_links_records(log):
    first = log.append("access_requested", "alice", {"product_id": "customers"})
    second = log.append("access_approved", "dana", {"product_id": "customers"})
    assert second.prev_hash == first.hash
    assert second.seq == 1


def test_append_requires_event_keys(log):
    with pytest.raises(PayloadError):
        log.append("access_requested", "alice", {})
    with pytest.raises(PayloadError):
        log.append("query_denied", "alice", {
            "product_id": "customers", "purpose_text": "x",
            "purpose_category": "analytics",  # sql_text and verdict_reasons missing
        })
    with pytest.raises(PayloadError):
        log.append("query_executed", "alice", {
            "product_id": "customers", "purpose_text": "x",
            "purpose_category": "analytics", "sql_text": "SELECT",
        })
    with pytest.raises(PayloadError):
        log.append("not_an_event", "alice", {"product_id": "x"})


def test_records_survive_reload(tmp_path):
    path = tmp_path / "audit.log"
    fill(AuditLog(path, clock=FixedClock()), 5)
    reopened = AuditLog(path, clock=FixedClock())
    assert len(reopened.records) == 5
    reopened.append("access_requested", "again", {"product_id": "customers"})
    assert verify_chain(path).ok


def test_file_is_one_canonical_json_record_per_line(log):
    fill(log, 3)
    lines = log.path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    for line in lines:
        doc = json.loads(line)
        assert list(doc.keys()) == sorted(doc.keys())


# --- verification ------------------------------------------------------------


def test_verify_ok_for_untampered_log(log):
    fill(log, 10)
    status = log.verify()
    assert status.ok and status.first_bad_seq is None


def test_verify_empty_or_missing_file(tmp_path):
    assert verify_chain(tmp_path / "never-written.log").ok


def test_payload_tamper_detected_at_seq(log):
    fill(log, 10)
    lines = log.path.read_text(encoding="utf-8").splitlines()
    assert "ar-000004" in lines[4]
    lines[4] = lines[4].replace("ar-000004", "ar-999904", 1)
    log.path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    status = verify_chain(log.path)
    assert not status.ok
    assert status.first_bad_seq == 4


def test_deleted_record_breaks_at_gap(log):
    fill(log, 10)
    lines = log.path.read_text(encoding="utf-8").splitlines()
    del lines[7]
    log.path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    status = verify_chain(log.path)
    assert not status.ok
    assert status.first_bad_seq == 7


def test_truncated_final_line_detected(log):
    fill(log, 5)
    raw = log.path.read_bytes()
    log.path.write_bytes(raw[:-10])  # crash mid-write of the final record
    status = verify_chain(log.path)
    assert not status.ok
    assert status.first_bad_seq == 4


def test_rewritten_hash_detected(log):
    fill(log, 6)
    records = [json.loads(line) for line in log.path.read_text().splitlines()]
    records[2]["hash"] = "f" * 64
    log.path.write_text(
        "\n".join(json.dumps(r, sort_keys=True, separators=(",", ":")) for r in records) + "\n"
    )
    status = verify_chain(log.path)
    assert not status.ok
    assert status.first_bad_seq == 2


@settings(max_examples=80, deadline=None)
@given(data=st.data())
def test_any_single_byte_flip_is_detected(tmp_path_factory, data):
    path = tmp_path_factory.mktemp("tamper") / "audit.log"
    fill(AuditLog(path, clock=FixedClock()), 8)
    pristine = path.read_bytes()
    pos = data.draw(st.integers(0, len(pristine) - 1))
    delta = data.draw(st.integers(1, 255))
    mutated = bytearray(pristine)
    mutated[pos] = (mutated[pos] + delta) % 256
    path.write_bytes(bytes(mutated))

    # the record whose line contains the mutated byte must be the first to fail
    expected_seq = pristine[:pos].count(b"\n")
    status = verify_chain(path)
    assert not status.ok
    assert status.first_bad_seq == expected_seq


# --- queries -----------------------------------------------------------------


def test_query_filters_conjunctive(log):
    fill(log, 9)
    by_actor = log.query(actor="user0")
    assert all(r.actor == "user0" for r in by_actor)
    both = log.query(actor="user0", product_id="customers")
    assert all(r.payload["product_id"] == "customers" for r in both)
    assert [r.seq for r in both] == sorted(r.seq for r in both)


def test_query_empty_filter_returns_all(log):
    fill(log, 4)
    assert len(log.query()) == 4


def test_query_unknown_actor_empty(log):
    fill(log, 4)
    assert log.query(actor="nobody") == []


def test_query_since(log):
    fill(log, 6)
    cutoff = log.records[3].timestamp
    assert [r.seq for r in log.query(since=cutoff)] == [3, 4, 5]
