"""Dataset manifests, FITS-backed loading, model weight files, composite cache.

Model weight format ("RBNN"): magic b"RBNN", format version u16, layer
count u16, input dims (3 x u32), then per layer: kind tag u8, activation
tag u8, rate f32 (dropout only, else 0), tensor count u8, and per tensor
its rank u32, dims u32 each, payload as little-endian float32. The file
ends with a CRC32 (u32) over all payload bytes. Little-endian throughout.
"""

import csv
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from realbogus.errors import ManifestError, ModelFormatError
from realbogus import fitsio
from realbogus.nn.network import LayerSpec, Network
from realbogus.stamps import DiaSet

MAGIC = b"RBNN"
FORMAT_VERSION = 1

_KIND_TAGS = {"Conv2D": 1, "MaxPool2D": 2, "Dropout": 3, "Flatten": 4, "Dense": 5}
_KIND_NAMES = {v: k for k, v in _KIND_TAGS.items()}
_ACT_TAGS = {"none": 0, "relu": 1, "softmax": 2}
_ACT_NAMES = {v: k for k, v in _ACT_TAGS.items()}


# ---------------------------------------------------------------------------
# manifest

MANIFEST_COLUMNS = ["id", "label", "tmpl", "srch", "diff", "split"]


@dataclass
class ManifestRow:
    id: str
    label: int
    tmpl: str
    srch: str
    diff: str = ""    # empty when only the pair is available
    split: str = ""


def load_manifest(path):
    rows = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_COLUMNS:
            raise ManifestError(
                f"manifest columns {reader.fieldnames} != {MANIFEST_COLUMNS}")
        for record in reader:
            if record["label"] not in ("0", "1"):
                raise ManifestError(
                    f"bad label {record['label']!r} for id {record['id']!r}")
            if record["id"] in seen:
                raise ManifestError(f"duplicate id {record['id']!r}")
            seen.add(record["id"])
            rows.append(ManifestRow(
                id=record["id"], label=int(record["label"]),
                tmpl=record["tmpl"], srch=record["srch"],
                diff=record["diff"], split=record["split"]))
    return rows


def save_manifest(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for r in rows:
            writer.writerow([r.id, r.label, r.tmpl, r.srch, r.diff, r.split])


def load_dia_sets(manifest_rows, base_dir="."):
    """Materialize DiaSets from manifest rows, reading FITS stamps."""
    base = Path(base_dir)
    sets = []
    for r in manifest_rows:
        tmpl = fitsio.read_fits_file(base / r.tmpl, "tmpl", id=r.id)
        srch = fitsio.read_fits_file(base / r.srch, "srch", id=r.id)
        diff = fitsio.read_fits_file(base / r.diff, "diff", id=r.id) if r.diff else None
        sets.append(DiaSet(id=r.id, tmpl=tmpl, srch=srch, diff=diff,
                           label=r.label, provenance="des"))
    return sets


# ---------------------------------------------------------------------------
# model weights

def save_model(network, path):
    """Write network parameters and layer structure in the RBNN format."""
    header = MAGIC + struct.pack(
        "<HH3I", FORMAT_VERSION, len(network.layers), *network.input_shape)
    body = bytearray()
    payload = bytearray()
    for layer in network.layers:
        spec = layer.spec
        rate = spec.rate if spec.kind == "Dropout" else 0.0
        body += struct.pack("<BBfB", _KIND_TAGS[spec.kind],
                            _ACT_TAGS[spec.activation], rate, len(layer.params))
        for p in layer.params:
            body += struct.pack("<I", p.ndim)
            body += struct.pack(f"<{p.ndim}I", *p.shape)
            raw = np.asarray(p, dtype="<f4").tobytes()
            body += raw
            payload += raw
    blob = header + bytes(body) + struct.pack("<I", zlib.crc32(bytes(payload)))
    with open(path, "wb") as fh:
        fh.write(blob)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def unpack(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ModelFormatError("truncated model file")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def raw(self, size):
        if self.pos + size > len(self.data):
            raise ModelFormatError("truncated model file")
        out = self.data[self.pos:self.pos + size]
        self.pos += size
        return out


def load_model(path):
    """Read an RBNN file back into a Network (params as float64 copies of f32)."""
    with open(path, "rb") as fh:
        data = fh.read()
    reader = _Reader(data)
    if reader.raw(4) != MAGIC:
        raise ModelFormatError("bad magic; not an RBNN model file")
    version, n_layers, h, w, c = reader.unpack("<HH3I")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    specs = []
    tensors = []
    payload = bytearray()
    for _ in range(n_layers):
        kind_tag, act_tag, rate, n_params = reader.unpack("<BBfB")
        if kind_tag not in _KIND_NAMES or act_tag not in _ACT_NAMES:
            raise ModelFormatError(f"unknown layer tag {kind_tag}/{act_tag}")
        kind = _KIND_NAMES[kind_tag]
        layer_tensors = []
        for _ in range(n_params):
            (ndim,) = reader.unpack("<I")
            shape = reader.unpack(f"<{ndim}I")
            raw = reader.raw(4 * int(np.prod(shape)))
            payload += raw
            layer_tensors.append(
                np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape))
        spec = LayerSpec(kind, activation=_ACT_NAMES[act_tag])
        if kind == "Dropout":
            spec.rate = round(float(rate), 6)
        elif kind == "Conv2D":
            kh, kw, _, f = layer_tensors[0].shape
            spec.kernel_size, spec.filters = (kh, kw), f
        elif kind == "Dense":
            spec.units = layer_tensors[0].shape[1]
        specs.append(spec)
        tensors.append(layer_tensors)
    (crc,) = reader.unpack("<I")
    if crc != zlib.crc32(bytes(payload)):
        raise ModelFormatError("payload CRC mismatch; model file corrupted")

    network = Network(specs, (h, w, c))
    for layer, layer_tensors in zip(network.layers, tensors):
        if len(layer.params) != len(layer_tensors):
            raise ModelFormatError("parameter count mismatch while rebuilding")
        for p, t in zip(layer.params, layer_tensors):
            if p.shape != t.shape:
                raise ModelFormatError(
                    f"parameter shape {t.shape} != expected {p.shape}")
        layer.params = layer_tensors
    return network.eval_mode()


# ---------------------------------------------------------------------------
# composite cache: flat f32 blocks to skip re-preprocessing across runs

CACHE_MAGIC = b"RBCC"


def save_composite_cache(composites, labels, path):
    arr = np.asarray(composites, dtype="<f4")
    labels = np.asarray(labels, dtype="<i4")
    n, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC + struct.pack("<3I", n, h, w))
        fh.write(labels.tobytes())
        fh.write(arr.tobytes())


def load_composite_cache(path):
    with open(path, "rb") as fh:
        data = fh.read()
    reader = _Reader(data)
    if reader.raw(4) != CACHE_MAGIC:
        raise ModelFormatError("bad magic; not a composite cache file")
    n, h, w = reader.unpack("<3I")
    labels = np.frombuffer(reader.raw(4 * n), dtype="<i4").astype(int)
    arr = np.frombuffer(reader.raw(4 * n * h * w), dtype="<f4")
    return arr.astype(np.float64).reshape(n, h, w), labels
