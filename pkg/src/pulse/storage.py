"""File formats: .rdt frame tensors, dataset manifests and pose tables,
and PULSECKP checkpoints.

.rdt        magic RDT1, u32 R, A, D (little-endian), then R*A*D float32
            little-endian values in (range, angle, doppler) row-major order.
PULSECKP    magic, u32 version, length-prefixed UTF-8 model-config text,
            u64 seed, u32 parameter count, then per parameter a
            length-prefixed name, u32 rank, u32 dims, and float64
            little-endian values. Loading then saving is byte-identical.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError

RDT_MAGIC = b"RDT1"
CKP_MAGIC = b"PULSECKP"
CKP_VERSION = 1


def write_rdt(path, values):
    values = np.asarray(values)
    if values.ndim != 3:
        raise DataError(f"rdt expects an (R, A, D) tensor, got shape {values.shape}")
    r, a, d = values.shape
    payload = values.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(RDT_MAGIC)
        fh.write(struct.pack("<III", r, a, d))
        fh.write(payload)


def read_rdt(path):
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if blob[:4] != RDT_MAGIC:
        raise DataError(f"{path}: bad magic {blob[:4]!r}, expected {RDT_MAGIC!r}")
    r, a, d = struct.unpack_from("<III", blob, 4)
    expected = 16 + 4 * r * a * d
    if len(blob) != expected:
        raise DataError(f"{path}: size {len(blob)} != expected {expected}")
    flat = np.frombuffer(blob, dtype="<f4", offset=16)
    return flat.reshape(r, a, d).astype(np.float64)


# ---------------------------------------------------------------------------
# Manifest (key=value lines) and pose CSV

def write_manifest(path, entries):
    lines = [f"{key}={value}" for key, value in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    entries = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}: malformed manifest line {line!r}")
        key, _, value = line.partition("=")
        entries[key] = value
    return entries


POSES_HEADER = "seq,frame,joint,x_mm,y_mm,z_mm"


def write_poses_csv(path, rows):
    """rows: iterable of (seq, frame, joint, x, y, z)."""
    lines = [POSES_HEADER]
    for seq, frame, joint, x, y, z in rows:
        lines.append(f"{seq},{frame},{joint},{float(x)!r},{float(y)!r},{float(z)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_poses_csv(path, joints):
    """-> {seq_id: (T, J, 3) mm array} with frames in index order."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not lines or lines[0] != POSES_HEADER:
        raise DataError(f"{path}: expected header {POSES_HEADER!r}")
    by_seq: dict[str, dict[int, np.ndarray]] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        seq, frame, joint, x, y, z = line.split(",")
        frame_map = by_seq.setdefault(seq, {})
        pose = frame_map.setdefault(int(frame), np.zeros((joints, 3)))
        pose[int(joint)] = (float(x), float(y), float(z))
    out = {}
    for seq, frame_map in by_seq.items():
        frames = sorted(frame_map)
        if frames != list(range(len(frames))):
            raise DataError(f"{path}: sequence {seq} has non-contiguous frames")
        out[seq] = np.stack([frame_map[f] for f in frames])
    return out


# ---------------------------------------------------------------------------
# Checkpoints

def _pack_str(text):
    blob = text.encode("utf-8")
    return struct.pack("<I", len(blob)) + blob


class _Reader:
    def __init__(self, blob, path):
        self.blob = blob
        self.off = 0
        self.path = path

    def take(self, n):
        if self.off + n > len(self.blob):
            raise DataError(f"{self.path}: truncated checkpoint")
        out = self.blob[self.off:self.off + n]
        self.off += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def u64(self):
        return struct.unpack("<Q", self.take(8))[0]

    def string(self):
        return self.take(self.u32()).decode("utf-8")


def save_checkpoint(path, config_text, seed, named_params):
    """named_params: ordered iterable of (name, float64 array)."""
    parts = [CKP_MAGIC, struct.pack("<I", CKP_VERSION), _pack_str(config_text),
             struct.pack("<Q", int(seed) & (2**64 - 1))]
    named_params = list(named_params)
    parts.append(struct.pack("<I", len(named_params)))
    for name, values in named_params:
        values = np.asarray(values, dtype=np.float64)
        parts.append(_pack_str(name))
        parts.append(struct.pack("<I", values.ndim))
        parts.append(struct.pack(f"<{values.ndim}I", *values.shape))
        parts.append(values.astype("<f8").tobytes(order="C"))
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path):
    """-> (config_text, seed, ordered list of (name, array))."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rd = _Reader(blob, path)
    if rd.take(8) != CKP_MAGIC:
        raise DataError(f"{path}: bad checkpoint magic")
    version = rd.u32()
    if version != CKP_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    config_text = rd.string()
    seed = rd.u64()
    count = rd.u32()
    params = []
    for _ in range(count):
        name = rd.string()
        ndim = rd.u32()
        shape = struct.unpack(f"<{ndim}I", rd.take(4 * ndim))
        n = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(rd.take(8 * n), dtype="<f8").reshape(shape).copy()
        params.append((name, data))
    if rd.off != len(blob):
        raise DataError(f"{path}: trailing bytes in checkpoint")
    return config_text, seed, params


# ---------------------------------------------------------------------------
# Dataset directory access

class Dataset:
    """In-memory view of an emitted dataset directory."""

    def __init__(self, root, manifest, splits, frames, poses):
        self.root = Path(root)
        self.manifest = manifest
        self.splits = splits          # {"train": [seq ids], ...}
        self.frames = frames          # {seq: (T, R, A, D) float64}
        self.poses = poses            # {seq: (T, J, 3) mm}

    def split_sequences(self, split):
        if split == "all":
            ids = [sid for name in ("train", "val", "test")
                   for sid in self.splits.get(name, [])]
        else:
            ids = self.splits.get(split, [])
        return [(sid, self.frames[sid], self.poses[sid]) for sid in ids]


def load_dataset(root):
    root = Path(root)
    manifest = read_manifest(root / "manifest.txt")
    for key in ("seed", "R", "A", "D", "J", "frame_rate"):
        if key not in manifest:
            raise DataError(f"{root}: manifest missing key {key!r}")
    joints = int(manifest["J"])
    poses = read_poses_csv(root / "poses.csv", joints)
    splits = {}
    for name in ("train", "val", "test"):
        raw = manifest.get(f"split_{name}", "")
        splits[name] = [s for s in raw.split(",") if s]
    frames = {}
    for seq in poses:
        t_count = poses[seq].shape[0]
        stack = [read_rdt(root / "frames" / f"{seq}_{f:04d}.rdt")
                 for f in range(t_count)]
        frames[seq] = np.stack(stack)
    return Dataset(root, manifest, splits, frames, poses)
