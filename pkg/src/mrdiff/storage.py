"""Binary containers for images, masks, coil stacks, and checkpoints.

The "MRK1" container holds one array: a 20-byte little-endian header
(magic, kind, n_coils, h, w) followed by the payload -- one byte per
position for masks, interleaved re/im float32 pairs (coil-major,
row-major) otherwise. Arrays are float32 on disk and complex128 in
memory.

Checkpoints are a text manifest (config lines, then one line per tensor:
name, rank, extents, offset, length) followed by a raw little-endian
float64 blob.
"""

import io
import struct

import numpy as np

from .errors import CheckpointError, FormatError

MAGIC = b"MRK1"
KIND_IMAGE = 0
KIND_KSPACE = 1
KIND_MASK = 2
KIND_COILS = 3

_HEADER = struct.Struct("<4sIIII")
_SIZE_CAP = 1 << 30  # bytes; reject absurd headers before allocating

CKPT_MAGIC = "MRCK1"


def save_array(path, data, kind):
    """Write one array to an MRK1 container.

    Masks must be 2-D 0/1 arrays; images and k-space may be (h, w) or
    (n_coils, h, w); coil stacks are (n_coils, h, w).
    """
    if kind == KIND_MASK:
        arr = np.asarray(data)
        if arr.ndim != 2 or not np.isin(arr, (0, 1)).all():
            raise FormatError(f"mask payload must be 2-D binary, got shape {arr.shape}")
        n_coils, (h, w) = 1, arr.shape
        payload = arr.astype(np.uint8).tobytes()
    else:
        arr = np.asarray(data, dtype=np.complex128)
        if arr.ndim == 2:
            stack = arr[None]
        elif arr.ndim == 3:
            stack = arr
        else:
            raise FormatError(f"expected 2-D or 3-D complex payload, got shape {arr.shape}")
        n_coils, h, w = stack.shape
        inter = np.empty((n_coils, h, w, 2), dtype="<f4")
        inter[..., 0] = stack.real
        inter[..., 1] = stack.imag
        payload = inter.tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, kind, n_coils, h, w))
        fh.write(payload)


def load_array(path):
    """Read an MRK1 container; returns ``(data, kind)``.

    Images and k-space come back as (h, w) complex when single-coil and
    (n_coils, h, w) otherwise; masks as (h, w) uint8.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"truncated header: {len(raw)} bytes < {_HEADER.size} (offset 0)")
    magic, kind, n_coils, h, w = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0")
    if kind not in (KIND_IMAGE, KIND_KSPACE, KIND_MASK, KIND_COILS):
        raise FormatError(f"unknown kind {kind} at offset 4")
    if kind == KIND_MASK:
        expected = h * w
    else:
        expected = n_coils * h * w * 8
    if not 0 < expected <= _SIZE_CAP:
        raise FormatError(f"payload size {expected} outside (0, {_SIZE_CAP}] (offset 8)")
    body = raw[_HEADER.size :]
    if len(body) != expected:
        raise FormatError(f"payload is {len(body)} bytes, header implies {expected} (offset {_HEADER.size})")
    if kind == KIND_MASK:
        mask = np.frombuffer(body, dtype=np.uint8).reshape(h, w)
        if not np.isin(mask, (0, 1)).all():
            raise FormatError(f"mask payload has non-binary bytes (offset {_HEADER.size})")
        return mask.copy(), kind
    inter = np.frombuffer(body, dtype="<f4").reshape(n_coils, h, w, 2).astype(np.float64)
    data = inter[..., 0] + 1j * inter[..., 1]
    if kind != KIND_COILS and n_coils == 1:
        data = data[0]
    return data, kind


# -- checkpoints ----------------------------------------------------------

def save_checkpoint(path, named_tensors, config, step):
    """Write named float64 arrays plus config/step to a manifest+blob file."""
    lines = [CKPT_MAGIC, f"step {int(step)}"]
    for key in sorted(config):
        lines.append(f"cfg {key} {config[key]}")
    blob = io.BytesIO()
    offset = 0
    for name, arr in named_tensors.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        nbytes = a.nbytes
        dims = " ".join(str(d) for d in a.shape) if a.ndim else ""
        lines.append(f"tensor {name} {a.ndim} {dims} {offset} {nbytes}".replace("  ", " "))
        blob.write(a.tobytes())
        offset += nbytes
    lines.append(f"blob {offset}")
    try:
        with open(path, "wb") as fh:
            fh.write(("\n".join(lines) + "\n").encode())
            fh.write(blob.getvalue())
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path):
    """Read a checkpoint; returns ``(named_tensors, config, step)``."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    head, sep, _ = raw.partition(b"blob ")
    if not sep:
        raise CheckpointError(f"{path}: no blob marker found")
    lines = head.decode().splitlines()
    if not lines or lines[0] != CKPT_MAGIC:
        raise CheckpointError(f"{path}: bad checkpoint magic")
    nl = raw.index(b"\n", len(head) + len(sep))
    blob_len = int(raw[len(head) + len(sep) : nl])
    blob = raw[nl + 1 :]
    if len(blob) != blob_len:
        raise CheckpointError(f"{path}: blob is {len(blob)} bytes, manifest says {blob_len}")

    step = 0
    config = {}
    tensors = {}
    for line in lines[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "step":
            step = int(parts[1])
        elif parts[0] == "cfg":
            config[parts[1]] = parts[2]
        elif parts[0] == "tensor":
            name, ndim = parts[1], int(parts[2])
            dims = tuple(int(d) for d in parts[3 : 3 + ndim])
            offset, nbytes = int(parts[3 + ndim]), int(parts[4 + ndim])
            if offset + nbytes > blob_len:
                raise CheckpointError(f"{path}: tensor {name} overruns blob")
            arr = np.frombuffer(blob, dtype="<f8", count=nbytes // 8, offset=offset)
            tensors[name] = arr.reshape(dims).copy()
        else:
            raise CheckpointError(f"{path}: unknown manifest line {line!r}")
    return tensors, config, step
