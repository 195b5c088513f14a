"""Canonical binary serialization, digests and the address type.

Every value that reaches a hash (transactions, blocks, world state) goes
through :func:`encode`.  The format is tag-prefixed, integers are fixed
width (signed 64-bit big endian), strings and byte strings are length
prefixed and dict entries are ordered by their encoded key, so two equal
values always produce the same bytes on every platform.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Any

ADDRESS_SIZE = 20
DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)

INT_MIN = -(1 << 63)
INT_MAX = (1 << 63) - 1


class CodecError(ValueError):
    """Value cannot be encoded, or a byte string is not a valid encoding."""


@dataclass(frozen=True, order=True)
class Address:
    """Opaque 20-byte identity of an account or a contract."""

    raw: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.raw, bytes) or len(self.raw) != ADDRESS_SIZE:
            raise CodecError(f"address must be {ADDRESS_SIZE} bytes")

    @classmethod
    def from_hex(cls, text: str) -> Address:
        if text.startswith("0x"):
            text = text[2:]
        try:
            return cls(bytes.fromhex(text))
        except ValueError as exc:
            raise CodecError(f"bad address {text!r}") from exc

    @classmethod
    def derive(cls, *parts: Any) -> Address:
        return cls(digest(encode(list(parts)))[:ADDRESS_SIZE])

    @property
    def hex(self) -> str:
        return "0x" + self.raw.hex()

    def __str__(self) -> str:
        return self.hex

    def __repr__(self) -> str:
        return f"Address({self.hex})"


ZERO_ADDRESS = Address(bytes(ADDRESS_SIZE))


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def leading_zero_bits(data: bytes) -> int:
    value = int.from_bytes(data, "big")
    return len(data) * 8 - value.bit_length()


def _u32(n: int) -> bytes:
    return struct.pack(">I", n)


def encode(value: Any) -> bytes:
    out = bytearray()
    _encode_into(value, out)
    return bytes(out)


def _encode_into(value: Any, out: bytearray) -> None:
    # bool before int: bool is an int subclass
    if value is None:
        out += b"N"
    elif value is True:
        out += b"T"
    elif value is False:
        out += b"F"
    elif isinstance(value, int):
        if not INT_MIN <= value <= INT_MAX:
            raise CodecError(f"integer {value} does not fit in 64 bits")
        out += b"I" + struct.pack(">q", value)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out += b"S" + _u32(len(raw)) + raw
    elif isinstance(value, Address):
        out += b"A" + value.raw
    elif isinstance(value, (bytes, bytearray)):
        out += b"B" + _u32(len(value)) + bytes(value)
    elif isinstance(value, (list, tuple)):
        out += b"L" + _u32(len(value))
        for item in value:
            _encode_into(item, out)
    elif isinstance(value, dict):
        pairs = sorted((encode(k), encode(v)) for k, v in value.items())
        out += b"D" + _u32(len(pairs))
        for k, v in pairs:
            out += k + v
    else:
        raise CodecError(f"cannot encode {type(value).__name__}")


def decode(data: bytes) -> Any:
    value, pos = _decode_at(data, 0)
    if pos != len(data):
        raise CodecError("trailing bytes after value")
    return value


def _take(data: bytes, pos: int, n: int) -> tuple[bytes, int]:
    end = pos + n
    if end > len(data):
        raise CodecError("truncated input")
    return data[pos:end], end


def _decode_at(data: bytes, pos: int) -> tuple[Any, int]:
    tag, pos = _take(data, pos, 1)
    if tag == b"N":
        return None, pos
    if tag == b"T":
        return True, pos
    if tag == b"F":
        return False, pos
    if tag == b"I":
        raw, pos = _take(data, pos, 8)
        return struct.unpack(">q", raw)[0], pos
    if tag in (b"S", b"B"):
        raw, pos = _take(data, pos, 4)
        body, pos = _take(data, pos, struct.unpack(">I", raw)[0])
        if tag == b"B":
            return body, pos
        try:
            return body.decode("utf-8"), pos
        except UnicodeDecodeError as exc:
            raise CodecError("invalid utf-8 in string") from exc
    if tag == b"A":
        raw, pos = _take(data, pos, ADDRESS_SIZE)
        return Address(raw), pos
    if tag == b"L":
        raw, pos = _take(data, pos, 4)
        items = []
        for _ in range(struct.unpack(">I", raw)[0]):
            item, pos = _decode_at(data, pos)
            items.append(item)
        return items, pos
    if tag == b"D":
        raw, pos = _take(data, pos, 4)
        result = {}
        for _ in range(struct.unpack(">I", raw)[0]):
            key, pos = _decode_at(data, pos)
            val, pos = _decode_at(data, pos)
            if isinstance(key, list):
                key = tuple(key)
            result[key] = val
        return result, pos
    raise CodecError(f"unknown tag {tag!r}")


# ABI argument values are restricted to these four kinds.
_JSON_TAGS = {"int": int, "str": str, "addr": Address, "bool": bool}


def is_typed_value(value: Any) -> bool:
    return isinstance(value, (bool, int, str, Address))


def value_to_json(value: Any) -> list:
    if isinstance(value, bool):
        return ["bool", value]
    if isinstance(value, int):
        return ["int", value]
    if isinstance(value, str):
        return ["str", value]
    if isinstance(value, Address):
        return ["addr", value.hex]
    raise CodecError(f"not an ABI value: {value!r}")


def value_from_json(item: Any) -> Any:
    if not (isinstance(item, list) and len(item) == 2 and item[0] in _JSON_TAGS):
        raise CodecError(f"bad tagged value {item!r}")
    tag, raw = item
    if tag == "addr":
        return Address.from_hex(raw)
    kind = _JSON_TAGS[tag]
    if type(raw) is not kind:
        raise CodecError(f"tag {tag} does not match {raw!r}")
    return raw
