"""Binary section-container framing shared by the graph and index files.

Layout (all little-endian):
  magic "SSFC" | kind (4 bytes) | version u16 | section count u16
  per section: name length u16 | name utf-8 | payload length u64 | payload
  trailer: crc32 u32 over every preceding byte
"""

from __future__ import annotations

import os
import struct
import zlib
from pathlib import Path

from .errors import CorruptionError, FormatVersionError

MAGIC = b"SSFC"


def pack_container(kind: bytes, version: int, sections: list[tuple[str, bytes]]) -> bytes:
    if len(kind) != 4:
        raise ValueError("container kind must be 4 bytes")
    out = bytearray()
    out += MAGIC
    out += kind
    out += struct.pack("<HH", version, len(sections))
    for name, payload in sections:
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded))
        out += encoded
        out += struct.pack("<Q", len(payload))
        out += payload
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def unpack_container(data: bytes, kind: bytes, version: int) -> dict[str, bytes]:
    if len(data) < 16:
        raise CorruptionError("file too short to be a container")
    if data[:4] != MAGIC:
        raise CorruptionError("bad magic; not a schemafilter container")
    if data[4:8] != kind:
        raise FormatVersionError(
            f"container kind {data[4:8]!r} does not match expected {kind!r}"
        )
    (stored_crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != stored_crc:
        raise CorruptionError("checksum mismatch; file is corrupt or truncated")
    file_version, count = struct.unpack("<HH", data[8:12])
    if file_version != version:
        raise FormatVersionError(f"format version {file_version} (reader supports {version})")
    sections: dict[str, bytes] = {}
    offset = 12
    body_end = len(data) - 4
    for _ in range(count):
        if offset + 2 > body_end:
            raise CorruptionError("truncated section header")
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (payload_len,) = struct.unpack_from("<Q", data, offset)
        offset += 8
        if offset + payload_len > body_end:
            raise CorruptionError(f"section {name!r} overruns the file")
        sections[name] = data[offset : offset + payload_len]
        offset += payload_len
    if offset != body_end:
        raise CorruptionError("trailing bytes after the last section")
    return sections


def atomic_write(path: str | Path, data: bytes) -> None:
    """Write via temp file + rename so interrupted runs never leave corrupt files."""
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)
