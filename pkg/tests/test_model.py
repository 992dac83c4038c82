import dataclasses
import struct

import pytest

from mobocc.model import (
    AbortNotice, CommitAck, CommitRequest, ConflictNotice, DataItemId, DataReply, DataRequest,
    HandoffForward, HandoffTransfer, IllegalTransition, InvalidationReport, TransactionInstance,
    TransactionType, TxnParams, TxnState, UpdateReport, VersionedValue, Withdraw, bs_addr, bs_of,
    host_addr, is_host, message_instance, message_size_bytes, site_of,
)

AMT = DataItemId("Account", 103, "Amount")
NO = DataItemId("Account", 103, "Account_no")


def encode(msg):
    """Independent wire encoding: 16-byte header (kind, sender, receiver,
    length), then 8-byte id hash, value and version per item."""
    header = struct.pack("<IIII", 1, 2, 3, 0)
    body = b"".join(struct.pack("<qqq", hash(i) & 0x7FFFFFFF, vv.value, vv.version)
                    for i, vv in msg.fresh_values.items())
    return header + body


def test_addresses_round_trip():
    assert host_addr(3) == "M3" and site_of("M3") == 3
    assert bs_addr(2) == "BS2" and bs_of("BS2") == 2
    assert is_host("M1") and not is_host("BS1")
    with pytest.raises(ValueError):
        site_of("BS1")


def test_item_display():
    assert str(AMT) == "Account[103].Amount"


def test_data_items_instantiates_row():
    t = TransactionType("T1", "Deposit", "Account", ("Account_no", "Amount"))
    assert t.data_items(103) == (NO, AMT)


def test_data_request_size():
    m = DataRequest(sender="M1", receiver="BS1", instance_id=1, txn_type_id="T1", row_key=103)
    assert message_size_bytes(m) == 28


def test_data_reply_size_two_items():
    frag = {AMT: VersionedValue(11500, 0), NO: VersionedValue(103, 0)}
    m = DataReply(sender="BS1", receiver="M1", instance_id=1, fragment=frag, arrival_time=605000)
    assert message_size_bytes(m) == 64


def test_update_report_size_matches_encoding():
    frag = {AMT: VersionedValue(12500, 1), NO: VersionedValue(103, 0)}
    m = UpdateReport(sender="BS1", receiver="M2", instance_id=2, fresh_values=frag, new_arrival_time=613154)
    assert message_size_bytes(m) == len(encode(m))
    assert message_size_bytes(m) == 64


def test_other_sizes():
    cr = CommitRequest(sender="M1", receiver="BS1", instance_id=1,
                       read_versions={AMT: 0, NO: 0}, write_set={AMT: 12500})
    assert message_size_bytes(cr) == 16 + 4 + 3 * 16
    assert message_size_bytes(dataclasses.replace(cr, params=TxnParams(103, 1000))) == 76
    assert message_size_bytes(ConflictNotice(sender="BS1", receiver="M2", instance_id=2, earliest_arrival=1)) == 28
    assert message_size_bytes(CommitAck(sender="BS1", receiver="M1", instance_id=1, commit_seq=1)) == 28
    ht = HandoffTransfer(sender="M1", receiver="BS2", instance_id=1, coordinator_of_record=1)
    assert message_size_bytes(ht) == 24
    assert message_size_bytes(HandoffForward(sender="BS2", receiver="BS1", wrapped=ht)) == 40
    assert message_size_bytes(AbortNotice(sender="BS1", receiver="M1", instance_id=1)) == 20
    assert message_size_bytes(Withdraw(sender="M1", receiver="BS1", instance_id=1)) == 20
    assert message_size_bytes(InvalidationReport(sender="BS1", receiver="M1", item_ids=(AMT, NO))) == 36


def test_message_instance_unwraps_forward():
    ack = CommitAck(sender="BS1", receiver="M1", instance_id=7, commit_seq=1)
    assert message_instance(HandoffForward(sender="BS1", receiver="BS2", wrapped=ack)) == 7
    assert message_instance(InvalidationReport(sender="BS1", receiver="M1", item_ids=())) is None


def test_unknown_message_kind_rejected():
    from mobocc.model import Message
    with pytest.raises(TypeError):
        message_size_bytes(Message(sender="a", receiver="b"))


def _inst():
    return TransactionInstance(1, 1, "T1", TxnParams(103, 1000), 1, 0)


def test_happy_path_transitions():
    inst = _inst()
    for s in ("REQUESTED", "TENTATIVE", "LOCALLY_COMMITTED", "AWAITING_GLOBAL",
              "RESTARTING", "TENTATIVE", "LOCALLY_COMMITTED", "AWAITING_GLOBAL", "GLOBALLY_COMMITTED"):
        inst.advance(TxnState[s])
    assert inst.state.terminal


@pytest.mark.parametrize("path", [
    ("TENTATIVE",),
    ("REQUESTED", "LOCALLY_COMMITTED"),
    ("REQUESTED", "TENTATIVE", "GLOBALLY_COMMITTED"),
    ("REQUESTED", "TENTATIVE", "LOCALLY_FAILED", "REQUESTED"),
])
def test_illegal_transitions_raise(path):
    inst = _inst()
    with pytest.raises(IllegalTransition):
        for s in path:
            inst.advance(TxnState[s])


def test_read_versions_from_snapshot():
    inst = _inst()
    inst.snapshot = {AMT: VersionedValue(12500, 1), NO: VersionedValue(103, 0)}
    assert inst.read_versions() == {AMT: 1, NO: 0}
