"""Signalling messages for the three session-establishment approaches and
their fixed-layout binary wire form.

Frame layout (big-endian)::

    magic   2  0x4D 0x45
    version 1  = 1
    tag     1  see TAGS
    length  2  payload length in bytes
    src     4
    dst     4
    sent_at 8  microseconds
    payload length bytes, layout per message type

Every message class declares its payload fields in order; the codec walks
those declarations, so encode and decode cannot drift apart.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field, fields
from typing import Any, ClassVar, Iterator

MAGIC = b"\x4d\x45"
VERSION = 1
PREAMBLE = struct.Struct(">2sBBH")
HEADER = struct.Struct(">IIQ")
FRAME_OVERHEAD = PREAMBLE.size + HEADER.size

U32_MAX = 0xFFFFFFFF


class ServiceType(enum.IntEnum):
    XURLLC = 1
    URLLC = 2
    EMBB = 3
    MMTC = 4


class Reason(enum.IntEnum):
    OK = 0
    NO_RESOURCES = 1
    TARGET_REJECTED = 2
    TIMEOUT = 3
    AUTH_REJECTED = 4
    NO_ROUTE = 5
    PATH_FAILURE = 6
    RELEASED = 7
    DUPLICATE_SESSION = 8
    PROTOCOL_VIOLATION = 9
    NODE_FAILURE = 10


class ErrorKind(str, enum.Enum):
    BAD_MAGIC = "BadMagic"
    BAD_VERSION = "BadVersion"
    UNKNOWN_TAG = "UnknownTag"
    TRUNCATED = "Truncated"
    TRAILING_GARBAGE = "TrailingGarbage"
    INVARIANT_VIOLATED = "InvariantViolated"


class CodecError(Exception):
    def __init__(self, kind: ErrorKind, detail: str = ""):
        super().__init__(f"{kind.value}: {detail}" if detail else kind.value)
        self.kind = kind
        self.detail = detail


class InvariantError(ValueError):
    """A message or value type was built with fields violating its invariants."""


def _require(cond: bool, what: str) -> None:
    if not cond:
        raise InvariantError(what)


# -- value types -------------------------------------------------------------

@dataclass(frozen=True)
class QosProfile:
    max_latency_us: int
    reliability_exp: int
    service_type: ServiceType = ServiceType.XURLLC

    def __post_init__(self) -> None:
        _require(1 <= self.max_latency_us <= U32_MAX, "max_latency_us out of range")
        _require(3 <= self.reliability_exp <= 9, "reliability exponent must be in [3, 9]")
        object.__setattr__(self, "service_type", ServiceType(self.service_type))

    @property
    def error_rate(self) -> float:
        return 10.0 ** -self.reliability_exp


@dataclass(frozen=True)
class PduSession:
    pdu_id: int
    qos: QosProfile

    def __post_init__(self) -> None:
        _require(1 <= self.pdu_id <= 255, "pdu_id must be in [1, 255]")


@dataclass(frozen=True)
class SessionRequest:
    user_id: int
    destination_id: int
    qos: QosProfile
    channel_quality: int

    def __post_init__(self) -> None:
        _require(0 <= self.user_id <= U32_MAX and 0 <= self.destination_id <= U32_MAX,
                 "node ids must fit in u32")
        _require(self.user_id != self.destination_id, "user_id equals destination_id")
        _require(0 <= self.channel_quality <= 15, "channel_quality must be in [0, 15]")


@dataclass(frozen=True)
class PduSessionList:
    requested: tuple[PduSession, ...]
    admitted: tuple[int, ...] = ()
    not_admitted: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        ids = [p.pdu_id for p in self.requested]
        _require(len(set(ids)) == len(ids), "duplicate pdu ids in requested list")
        _require(not set(self.admitted) & set(self.not_admitted), "admitted and not_admitted overlap")
        _require(sorted(self.admitted + self.not_admitted) == sorted(ids),
                 "admitted and not_admitted must partition requested")


# -- field codecs ----------------------------------------------------------------

class _Reader:
    def __init__(self, data: bytes, start: int, end: int):
        self.data = data
        self.pos = start
        self.end = end

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise CodecError(ErrorKind.TRUNCATED, f"need {n} bytes at offset {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: struct.Struct) -> tuple:
        return fmt.unpack(self.take(fmt.size))


_U8, _U16, _U32, _U64 = (struct.Struct(f) for f in (">B", ">H", ">I", ">Q"))
_QOS = struct.Struct(">IBB")
_REQ = struct.Struct(">II")


def _enc_qos(q: QosProfile) -> bytes:
    return _QOS.pack(q.max_latency_us, q.reliability_exp, int(q.service_type))


def _dec_qos(r: _Reader) -> QosProfile:
    lat, exp, svc = r.unpack(_QOS)
    _require(svc in ServiceType._value2member_map_, f"unknown service type {svc}")
    return QosProfile(lat, exp, ServiceType(svc))


def _enc_req(s: SessionRequest) -> bytes:
    return _REQ.pack(s.user_id, s.destination_id) + _enc_qos(s.qos) + _U8.pack(s.channel_quality)


def _dec_req(r: _Reader) -> SessionRequest:
    user, dest = r.unpack(_REQ)
    qos = _dec_qos(r)
    (cq,) = r.unpack(_U8)
    return SessionRequest(user, dest, qos, cq)


def _enc_pdus(pdus: tuple[PduSession, ...]) -> bytes:
    _require(len(pdus) <= 255, "too many pdu sessions")
    return _U8.pack(len(pdus)) + b"".join(_U8.pack(p.pdu_id) + _enc_qos(p.qos) for p in pdus)


def _dec_pdus(r: _Reader) -> tuple[PduSession, ...]:
    (n,) = r.unpack(_U8)
    out = []
    for _ in range(n):
        (pid,) = r.unpack(_U8)
        out.append(PduSession(pid, _dec_qos(r)))
    return tuple(out)


def _enc_ids8(ids: tuple[int, ...]) -> bytes:
    _require(len(ids) <= 255, "id list too long")
    return _U8.pack(len(ids)) + bytes(ids)


def _dec_ids8(r: _Reader) -> tuple[int, ...]:
    (n,) = r.unpack(_U8)
    return tuple(r.take(n))


def _enc_path(path: tuple[int, ...]) -> bytes:
    _require(len(path) <= 255, "path too long")
    return _U8.pack(len(path)) + b"".join(_U32.pack(h) for h in path)


def _dec_path(r: _Reader) -> tuple[int, ...]:
    (n,) = r.unpack(_U8)
    return tuple(_U32.unpack(r.take(4))[0] for _ in range(n))


def _scalar(fmt: struct.Struct, lo: int = 0) -> tuple[Any, Any]:
    hi = (1 << (8 * fmt.size)) - 1

    def enc(v: int) -> bytes:
        _require(lo <= int(v) <= hi, f"value {v} out of range")
        return fmt.pack(int(v))

    def dec(r: _Reader) -> int:
        v = r.unpack(fmt)[0]
        _require(v >= lo, f"value {v} out of range")
        return v

    return enc, dec


def _enc_bool(v: bool) -> bytes:
    return b"\x01" if v else b"\x00"


def _dec_bool(r: _Reader) -> bool:
    (b,) = r.unpack(_U8)
    _require(b in (0, 1), f"boolean byte must be 0 or 1 (got {b})")
    return bool(b)


def _dec_reason(r: _Reader) -> Reason:
    (b,) = r.unpack(_U8)
    _require(b in Reason._value2member_map_, f"unknown reason code {b}")
    return Reason(b)


CODECS: dict[str, tuple[Any, Any]] = {
    "u8": _scalar(_U8),
    "u16": _scalar(_U16),
    "u32": _scalar(_U32),
    "sid": _scalar(_U32, lo=1),
    "bool": (_enc_bool, _dec_bool),
    "reason": (lambda v: _U8.pack(int(v)), _dec_reason),
    "request": (_enc_req, _dec_req),
    "pdus": (_enc_pdus, _dec_pdus),
    "ids": (_enc_ids8, _dec_ids8),
    "path": (_enc_path, _dec_path),
}


def wire(kind: str, **kw: Any) -> Any:
    return field(metadata={"wire": kind}, **kw)


# -- messages ----------------------------------------------------------------------

@dataclass(frozen=True, kw_only=True)
class Message:
    TAG: ClassVar[int] = 0
    src: int
    dst: int
    sent_at_us: int = 0

    def __post_init__(self) -> None:
        _require(0 <= self.src <= U32_MAX and 0 <= self.dst <= U32_MAX, "header ids must fit in u32")
        _require(0 <= self.sent_at_us < 1 << 64, "sent_at_us must fit in u64")
        self.check()

    def check(self) -> None:
        """Per-message invariants beyond field ranges."""

    @classmethod
    def payload_fields(cls) -> list[tuple[str, str]]:
        return [(f.name, f.metadata["wire"]) for f in fields(cls) if "wire" in f.metadata]

    @property
    def name(self) -> str:
        return type(self).__name__

    @property
    def session_id(self) -> int:
        return getattr(self, "sid", 0)


@dataclass(frozen=True, kw_only=True)
class RrcSessionRequest(Message):
    TAG = 0x01
    request: SessionRequest = wire("request")
    pdus: tuple[PduSession, ...] = wire("pdus", default=())

    def check(self) -> None:
        PduSessionList(self.pdus, tuple(p.pdu_id for p in self.pdus))


@dataclass(frozen=True, kw_only=True)
class RrcSessionResponse(Message):
    TAG = 0x02
    sid: int = wire("u32")
    reason: Reason = wire("reason", default=Reason.OK)

    def check(self) -> None:
        _require((self.sid == 0) == (self.reason != Reason.OK),
                 "response carries a session id exactly when accepted")


@dataclass(frozen=True, kw_only=True)
class GnbNotification(Message):
    TAG = 0x03
    sid: int = wire("sid")
    request: SessionRequest = wire("request")


@dataclass(frozen=True, kw_only=True)
class GnbNotificationResponse(Message):
    TAG = 0x04
    sid: int = wire("sid")
    accept: bool = wire("bool")
    reason: Reason = wire("reason", default=Reason.OK)

    def check(self) -> None:
        _require(self.accept == (self.reason == Reason.OK), "accept flag must agree with reason")


@dataclass(frozen=True, kw_only=True)
class PathConfiguration(Message):
    TAG = 0x05
    sid: int = wire("sid")
    bearer_id: int = wire("u16")
    reserved_sessions: int = wire("u16")
    resource_units: int = wire("u16")
    path: tuple[int, ...] = wire("path")

    def check(self) -> None:
        _require(len(self.path) >= 2, "path_forwarding_info needs at least two hops")


@dataclass(frozen=True, kw_only=True)
class PathComplete(Message):
    TAG = 0x06
    sid: int = wire("sid")


@dataclass(frozen=True, kw_only=True)
class XnSetupRequest(Message):
    TAG = 0x07
    transaction_id: int = wire("u16")


@dataclass(frozen=True, kw_only=True)
class XnSetupResponse(Message):
    TAG = 0x08
    transaction_id: int = wire("u16")


@dataclass(frozen=True, kw_only=True)
class XnConnectionRequest(Message):
    TAG = 0x09
    sid: int = wire("sid")
    request: SessionRequest = wire("request")
    pdus: tuple[PduSession, ...] = wire("pdus")

    def check(self) -> None:
        _require(len(self.pdus) >= 1, "connection request needs at least one pdu session")
        PduSessionList(self.pdus, tuple(p.pdu_id for p in self.pdus))


@dataclass(frozen=True, kw_only=True)
class XnConnectionAck(Message):
    TAG = 0x0A
    sid: int = wire("sid")
    requested: tuple[PduSession, ...] = wire("pdus")
    admitted: tuple[int, ...] = wire("ids")
    not_admitted: tuple[int, ...] = wire("ids")

    def check(self) -> None:
        PduSessionList(self.requested, self.admitted, self.not_admitted)

    @property
    def sessions(self) -> PduSessionList:
        return PduSessionList(self.requested, self.admitted, self.not_admitted)


@dataclass(frozen=True, kw_only=True)
class RrcSessionConfig(Message):
    TAG = 0x0B
    sid: int = wire("sid")
    bearer_id: int = wire("u16")
    reserved_sessions: int = wire("u16")
    resource_units: int = wire("u16")
    path: tuple[int, ...] = wire("path")

    def check(self) -> None:
        _require(len(self.path) >= 2, "path_forwarding_info needs at least two hops")


@dataclass(frozen=True, kw_only=True)
class RrcComplete(Message):
    TAG = 0x0C
    sid: int = wire("sid")


@dataclass(frozen=True, kw_only=True)
class MeshAuthRequest(Message):
    TAG = 0x0D
    request: SessionRequest = wire("request")


@dataclass(frozen=True, kw_only=True)
class SessionRelease(Message):
    TAG = 0x0E
    sid: int = wire("sid")
    origin: int = wire("u32")
    reason: Reason = wire("reason", default=Reason.RELEASED)


@dataclass(frozen=True, kw_only=True)
class MeshTopologyUpdate(Message):
    """Link or node state change flooded among RAN nodes.

    ``element`` is 1 for a link (``a < b``, ``link_kind`` 1..4) and 2 for a
    node (``b`` and ``link_kind`` zero).
    """

    TAG = 0x0F
    origin: int = wire("u32")
    seq: int = wire("u32")
    element: int = wire("u8")
    a: int = wire("u32")
    b: int = wire("u32")
    link_kind: int = wire("u8")
    up: bool = wire("bool")

    def check(self) -> None:
        if self.element == 1:
            _require(self.a < self.b and 1 <= self.link_kind <= 4, "malformed link element")
        else:
            _require(self.element == 2 and self.b == 0 and self.link_kind == 0,
                     "malformed node element")


@dataclass(frozen=True, kw_only=True)
class MeshAuthResponse(Message):
    TAG = 0x10
    sid: int = wire("u32")
    reason: Reason = wire("reason", default=Reason.OK)

    def check(self) -> None:
        _require((self.sid == 0) == (self.reason != Reason.OK),
                 "response carries a session id exactly when accepted")


@dataclass(frozen=True, kw_only=True)
class MeshScheduleRequest(Message):
    TAG = 0x11
    sid: int = wire("sid")
    request: SessionRequest = wire("request")


@dataclass(frozen=True, kw_only=True)
class MeshScheduleResponse(Message):
    TAG = 0x12
    sid: int = wire("sid")
    reason: Reason = wire("reason", default=Reason.OK)


MESSAGE_TYPES: tuple[type[Message], ...] = (
    RrcSessionRequest, RrcSessionResponse, GnbNotification, GnbNotificationResponse,
    PathConfiguration, PathComplete, XnSetupRequest, XnSetupResponse, XnConnectionRequest,
    XnConnectionAck, RrcSessionConfig, RrcComplete, MeshAuthRequest, SessionRelease,
    MeshTopologyUpdate, MeshAuthResponse, MeshScheduleRequest, MeshScheduleResponse,
)
TAGS: dict[int, type[Message]] = {cls.TAG: cls for cls in MESSAGE_TYPES}
assert len(TAGS) == len(MESSAGE_TYPES)

LINK_KIND_CODES = {"Uu": 1, "Xn": 2, "F1": 3, "N_core": 4}


# -- codec -------------------------------------------------------------------------

def encode(msg: Message) -> bytes:
    payload = b"".join(CODECS[kind][0](getattr(msg, name)) for name, kind in msg.payload_fields())
    if len(payload) > 0xFFFF:
        raise InvariantError("payload exceeds 65535 bytes")
    return (PREAMBLE.pack(MAGIC, VERSION, msg.TAG, len(payload))
            + HEADER.pack(msg.src, msg.dst, msg.sent_at_us) + payload)


def _decode_at(data: bytes, start: int, *, whole: bool) -> tuple[Message, int]:
    if len(data) - start < PREAMBLE.size:
        # report a wrong magic before complaining about length
        if data[start:start + 2] != MAGIC[:len(data) - start]:
            raise CodecError(ErrorKind.BAD_MAGIC)
        raise CodecError(ErrorKind.TRUNCATED, "short preamble")
    magic, version, tag, length = PREAMBLE.unpack_from(data, start)
    if magic != MAGIC:
        raise CodecError(ErrorKind.BAD_MAGIC, magic.hex())
    if version != VERSION:
        raise CodecError(ErrorKind.BAD_VERSION, str(version))
    cls = TAGS.get(tag)
    if cls is None:
        raise CodecError(ErrorKind.UNKNOWN_TAG, f"0x{tag:02x}")
    end = start + FRAME_OVERHEAD + length
    if len(data) < end:
        raise CodecError(ErrorKind.TRUNCATED, f"frame needs {end - start} bytes")
    if whole and len(data) > end:
        raise CodecError(ErrorKind.TRAILING_GARBAGE, f"{len(data) - end} extra bytes")
    src, dst, sent_at = HEADER.unpack_from(data, start + PREAMBLE.size)
    reader = _Reader(data, start + FRAME_OVERHEAD, end)
    try:
        values = {name: CODECS[kind][1](reader) for name, kind in cls.payload_fields()}
        if reader.pos != end:
            raise CodecError(ErrorKind.TRAILING_GARBAGE, f"{end - reader.pos} unread payload bytes")
        return cls(src=src, dst=dst, sent_at_us=sent_at, **values), end
    except InvariantError as exc:
        raise CodecError(ErrorKind.INVARIANT_VIOLATED, str(exc)) from None


def decode(data: bytes) -> Message:
    """Decode exactly one frame; anything malformed raises :class:`CodecError`."""
    return _decode_at(bytes(data), 0, whole=True)[0]


def iter_frames(data: bytes) -> Iterator[Message]:
    """Decode a trace file: frames back to back with no separators."""
    data = bytes(data)
    pos = 0
    while pos < len(data):
        msg, pos = _decode_at(data, pos, whole=False)
        yield msg


def frame_length(data: bytes) -> int:
    """Payload length announced by a frame's prefix."""
    return PREAMBLE.unpack_from(data, 0)[3]
