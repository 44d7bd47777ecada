"""A small byte-oriented LZ77 codec with no entropy coding stage.

Token stream format (self-contained, versionless):

  literal run   0b000LLLLL                      -> L+1 literal bytes follow (1..32)
  short match   0bMMMOOOOO offlow               -> length M+2 (3..8),
                                                   distance ((OOOOO<<8)|offlow)+1
  long match    0b111OOOOO extra offlow         -> length extra+9 (9..264),
                                                   distance ((OOOOO<<8)|offlow)+1

Distances are limited to 8192; longer matches are split into multiple tokens.
Compression uses a single-entry hash table over 3-byte sequences, so output
is never optimal but always decodes to the input exactly.
"""

from __future__ import annotations

_MAX_DISTANCE = 8192
_MAX_LITERAL_RUN = 32
_MAX_MATCH = 264
_MIN_MATCH = 3


def compress(data: bytes) -> bytes:
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise TypeError("expected bytes")
    data = bytes(data)
    n = len(data)
    if n < _MIN_MATCH + 1:
        return _emit_all_literals(data)

    out = bytearray()
    table: dict[int, int] = {}
    pos = 0
    lit_start = 0
    # Last two positions cannot start a 3-byte match.
    limit = n - 2
    while pos < limit:
        key = data[pos] | (data[pos + 1] << 8) | (data[pos + 2] << 16)
        candidate = table.get(key)
        table[key] = pos
        if candidate is None or pos - candidate > _MAX_DISTANCE:
            pos += 1
            continue
        # The 24-bit key is exact, so candidate starts the same 3 bytes.
        length = _MIN_MATCH
        max_len = n - pos
        while length < max_len and data[candidate + length] == data[pos + length]:
            length += 1
        _flush_literals(out, data, lit_start, pos)
        distance = pos - candidate
        _emit_match(out, length, distance)
        # Seed the table at the match tail so adjacent repeats stay findable.
        tail = pos + length - 1
        if tail < limit:
            table[data[tail] | (data[tail + 1] << 8) | (data[tail + 2] << 16)] = tail
        pos += length
        lit_start = pos
    _flush_literals(out, data, lit_start, n)
    return bytes(out)


def decompress(data: bytes) -> bytes:
    out = bytearray()
    n = len(data)
    i = 0
    while i < n:
        ctrl = data[i]
        i += 1
        tag = ctrl >> 5
        if tag == 0:
            run = (ctrl & 0x1F) + 1
            if i + run > n:
                raise ValueError("truncated literal run")
            out += data[i : i + run]
            i += run
        else:
            if tag == 7:
                if i + 2 > n:
                    raise ValueError("truncated long match")
                length = data[i] + 9
                distance = (((ctrl & 0x1F) << 8) | data[i + 1]) + 1
                i += 2
            else:
                if i + 1 > n:
                    raise ValueError("truncated short match")
                length = tag + 2
                distance = (((ctrl & 0x1F) << 8) | data[i]) + 1
                i += 1
            start = len(out) - distance
            if start < 0:
                raise ValueError("match distance exceeds output")
            if distance >= length:
                out += out[start : start + length]
            else:
                for k in range(length):
                    out.append(out[start + k])
    return bytes(out)


def _emit_all_literals(data: bytes) -> bytes:
    out = bytearray()
    _flush_literals(out, data, 0, len(data))
    return bytes(out)


def _flush_literals(out: bytearray, data: bytes, start: int, end: int) -> None:
    while start < end:
        run = min(_MAX_LITERAL_RUN, end - start)
        out.append(run - 1)
        out += data[start : start + run]
        start += run


def _emit_match(out: bytearray, length: int, distance: int) -> None:
    offset = distance - 1
    off_hi = offset >> 8
    off_lo = offset & 0xFF
    while length >= _MIN_MATCH:
        chunk = min(length, _MAX_MATCH)
        # Avoid leaving a 1-2 byte remainder no token can express.
        if length - chunk in (1, 2):
            chunk = length - _MIN_MATCH
        if chunk <= 8:
            out.append(((chunk - 2) << 5) | off_hi)
            out.append(off_lo)
        else:
            out.append(0xE0 | off_hi)
            out.append(chunk - 9)
            out.append(off_lo)
        length -= chunk
