"""Minimal FITS reader/writer for single-HDU 51x51 postage stamps.

Supports BITPIX 16, 32, -32, -64 with BSCALE/BZERO, big-endian payloads,
2880-byte block padding. Anything else (extensions, compression, higher
NAXIS) errors loudly.
"""

import numpy as np

from realbogus.errors import DimensionError, FitsFormatError
from realbogus.stamps import PostageStamp, STAMP_SIZE

BLOCK = 2880
CARD = 80

_BITPIX_DTYPES = {
    16: ">i2",
    32: ">i4",
    -32: ">f4",
    -64: ">f8",
}


def _parse_cards(header_bytes):
    """Return ({keyword: raw value string}, n_cards) up to and including END."""
    cards = {}
    for offset in range(0, len(header_bytes), CARD):
        raw = header_bytes[offset:offset + CARD]
        if len(raw) < CARD:
            raise FitsFormatError(f"truncated header card at offset {offset}")
        try:
            card = raw.decode("ascii")
        except UnicodeDecodeError:
            raise FitsFormatError(f"non-ASCII header card at offset {offset}")
        keyword = card[:8].strip()
        if keyword == "END":
            return cards, offset // CARD + 1
        if keyword in ("", "COMMENT", "HISTORY"):
            continue
        if card[8:10] != "= ":
            continue  # commentary-style card without a value
        value = card[10:].split("/", 1)[0].strip()
        cards[keyword] = value
    raise FitsFormatError("no END card found in header")


def _numeric(cards, key, default=None):
    if key not in cards:
        if default is None:
            raise FitsFormatError(f"missing required header card {key}")
        return default
    try:
        return float(cards[key]) if "." in cards[key] else int(cards[key])
    except ValueError:
        raise FitsFormatError(f"non-numeric value for {key}: {cards[key]!r}")


def read_fits_stamp(data, role="diff", id=""):
    """Parse FITS bytes into a PostageStamp (pixels = BZERO + BSCALE * raw)."""
    if len(data) < BLOCK or data[:6] != b"SIMPLE":
        raise FitsFormatError("not a FITS file: header must begin with SIMPLE")
    # header may span several blocks; scan block by block for END
    header_end = None
    for n_blocks in range(1, len(data) // BLOCK + 1):
        chunk = data[:n_blocks * BLOCK]
        try:
            cards, _ = _parse_cards(chunk)
            header_end = n_blocks * BLOCK
            break
        except FitsFormatError as exc:
            if "END card" not in str(exc):
                raise
    if header_end is None:
        raise FitsFormatError("no END card found in header")

    bitpix = _numeric(cards, "BITPIX")
    if bitpix not in _BITPIX_DTYPES:
        raise FitsFormatError(f"unsupported BITPIX {bitpix}")
    naxis = _numeric(cards, "NAXIS")
    if naxis != 2:
        raise FitsFormatError(f"expected NAXIS=2 image, got NAXIS={naxis}")
    naxis1 = _numeric(cards, "NAXIS1")
    naxis2 = _numeric(cards, "NAXIS2")
    if (naxis1, naxis2) != (STAMP_SIZE, STAMP_SIZE):
        raise DimensionError(
            f"stamp must be {STAMP_SIZE}x{STAMP_SIZE}, got {naxis1}x{naxis2}")
    bscale = _numeric(cards, "BSCALE", default=1)
    bzero = _numeric(cards, "BZERO", default=0)

    dtype = np.dtype(_BITPIX_DTYPES[bitpix])
    nbytes = naxis1 * naxis2 * dtype.itemsize
    payload = data[header_end:header_end + nbytes]
    if len(payload) < nbytes:
        raise FitsFormatError("truncated data section")
    raw = np.frombuffer(payload, dtype=dtype).reshape(naxis2, naxis1)
    pixels = bzero + bscale * raw.astype(np.float64)
    return PostageStamp(pixels, role=role, id=id)


def _card(keyword, value):
    if isinstance(value, bool):
        text = f"{keyword:<8}= {'T' if value else 'F':>20}"
    elif isinstance(value, (int, float)):
        text = f"{keyword:<8}= {value:>20}"
    else:
        text = f"{keyword:<8}= '{value}'"
    return text.ljust(CARD).encode("ascii")


def _pad(data):
    rem = len(data) % BLOCK
    return data if rem == 0 else data + b"\x00" * (BLOCK - rem)


def write_fits_stamp(stamp, bitpix=-64):
    """Serialize a stamp to FITS bytes, padded to 2880-byte blocks."""
    if bitpix not in _BITPIX_DTYPES:
        raise FitsFormatError(f"unsupported BITPIX {bitpix}")
    header = b"".join([
        _card("SIMPLE", True),
        _card("BITPIX", bitpix),
        _card("NAXIS", 2),
        _card("NAXIS1", STAMP_SIZE),
        _card("NAXIS2", STAMP_SIZE),
        "END".ljust(CARD).encode("ascii"),
    ])
    dtype = np.dtype(_BITPIX_DTYPES[bitpix])
    if bitpix > 0:
        raw = np.rint(stamp.pixels).astype(dtype)
    else:
        raw = stamp.pixels.astype(dtype)
    return _pad(header) + _pad(raw.tobytes())


def read_fits_file(path, role, id=""):
    with open(path, "rb") as fh:
        return read_fits_stamp(fh.read(), role=role, id=id)


def write_fits_file(stamp, path, bitpix=-64):
    with open(path, "wb") as fh:
        fh.write(write_fits_stamp(stamp, bitpix=bitpix))
