from __future__ import annotations

import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import random_message

from meshran.messages import (
    FRAME_OVERHEAD, MESSAGE_TYPES, TAGS, CodecError, ErrorKind, InvariantError, PathComplete,
    PduSession, QosProfile, RrcSessionRequest, RrcSessionResponse, SessionRequest, XnConnectionAck,
    decode, encode, iter_frames,
)


def test_path_complete_frame_by_hand():
    frame = encode(PathComplete(src=1, dst=2, sent_at_us=3, sid=7))
    want = (b"\x4d\x45" + bytes([1, 0x06]) + struct.pack(">H", 4)
            + struct.pack(">IIQ", 1, 2, 3) + b"\x00\x00\x00\x07")
    assert frame == want
    assert len(frame) == FRAME_OVERHEAD + 4 == 26


def test_channel_quality_byte():
    req = SessionRequest(1, 6, QosProfile(1000, 5), channel_quality=15)
    frame = encode(RrcSessionRequest(src=1, dst=2, request=req))
    # payload: source u32, destination u32, qos (u32 latency, u8 exp, u8 type), quality u8
    assert frame[FRAME_OVERHEAD + 14] == 0x0F


def test_response_round_trip_keeps_session_id():
    msg = RrcSessionResponse(src=2, dst=1, sid=42)
    assert decode(encode(msg)).sid == 42


def test_tag_table():
    assert sorted(TAGS) == list(range(0x01, 0x13))
    assert TAGS[0x0F].__name__ == "MeshTopologyUpdate"
    assert len(MESSAGE_TYPES) == 18


def test_unknown_tag():
    frame = bytearray(encode(PathComplete(src=1, dst=2, sid=1)))
    frame[3] = 0x7F
    with pytest.raises(CodecError) as err:
        decode(bytes(frame))
    assert err.value.kind is ErrorKind.UNKNOWN_TAG


def test_ack_missing_requested_id_is_invariant_violation():
    q = QosProfile(1000, 5)
    ack = XnConnectionAck(src=1, dst=2, sid=3, requested=(PduSession(1, q), PduSession(2, q)),
                          admitted=(1,), not_admitted=(2,))
    frame = bytearray(encode(ack))
    # last two bytes are the not_admitted list: count 1, id 2 -> count 0 and shrink
    assert frame[-2:] == b"\x01\x02"
    mutated = frame[:-2] + b"\x00"
    struct.pack_into(">H", mutated, 4, len(mutated) - FRAME_OVERHEAD)
    with pytest.raises(CodecError) as err:
        decode(bytes(mutated))
    assert err.value.kind is ErrorKind.INVARIANT_VIOLATED


def test_ack_constructor_enforces_partition():
    q = QosProfile(1000, 5)
    with pytest.raises(InvariantError):
        XnConnectionAck(src=1, dst=2, sid=3, requested=(PduSession(1, q),), admitted=(1,),
                        not_admitted=(1,))


@pytest.mark.parametrize("data, kind", [
    (b"", ErrorKind.TRUNCATED),
    (b"\x00", ErrorKind.BAD_MAGIC),
    (b"XX\x01\x06\x00\x00", ErrorKind.BAD_MAGIC),
    (b"ME\x02\x06\x00\x00", ErrorKind.BAD_VERSION),
    (b"ME\x01\x06\x00\x04", ErrorKind.TRUNCATED),
])
def test_structured_errors(data, kind):
    with pytest.raises(CodecError) as err:
        decode(data)
    assert err.value.kind is kind


def test_trailing_garbage():
    with pytest.raises(CodecError) as err:
        decode(encode(PathComplete(src=1, dst=2, sid=1)) + b"\x00")
    assert err.value.kind is ErrorKind.TRAILING_GARBAGE


def test_trace_file_is_frames_back_to_back():
    rng = random.Random(3)
    msgs = [random_message(rng) for _ in range(50)]
    assert list(iter_frames(b"".join(encode(m) for m in msgs))) == msgs


def test_invalid_values_rejected_at_construction():
    with pytest.raises(InvariantError):
        QosProfile(1000, 2)
    with pytest.raises(InvariantError):
        encode(PathComplete(src=1, dst=2, sid=0))
    zero_sid = encode(PathComplete(src=1, dst=2, sid=1))[:-4] + bytes(4)
    with pytest.raises(CodecError) as err:
        decode(zero_sid)
    assert err.value.kind is ErrorKind.INVARIANT_VIOLATED
    with pytest.raises(InvariantError):
        SessionRequest(1, 2, QosProfile(1, 5), channel_quality=16)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_property(seed):
    msg = random_message(random.Random(seed))
    assert decode(encode(msg)) == msg


@settings(max_examples=500, deadline=None)
@given(st.binary(max_size=80))
def test_decoder_never_crashes(data):
    try:
        decode(data)
    except CodecError:
        pass


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 200), st.integers(0, 255))
def test_single_byte_corruption_is_structured(seed, pos, value):
    frame = bytearray(encode(random_message(random.Random(seed))))
    frame[pos % len(frame)] = value
    try:
        decode(bytes(frame))
    except CodecError:
        pass
