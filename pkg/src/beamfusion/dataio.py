"""Binary tensor files, dataset manifests, and checkpoint containers.

Formats are deliberately minimal and fully specified here:

Tensor file ("MMBT"): magic 4 bytes, version u8, dtype code u8 (f32=1,
f64=2), rank u8, then rank u32 dims, then the row-major payload.  All
integers and floats little-endian.  Round trips are bit-exact, including
NaN payloads.

Checkpoint container ("MMBC"): magic, version u8, u32 metadata length +
UTF-8 key=value metadata block, u32 entry count, then per entry a u16 name
length + name + embedded tensor file bytes.

Manifest: line-delimited CSV records prefixed by '#' header lines that
carry the manifest kind (raw or prep) and per-scenario metadata.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

_TENSOR_MAGIC = b"MMBT"
_CHECKPOINT_MAGIC = b"MMBC"
_VERSION = 1
_DTYPE_CODES = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}
_CODE_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    """Write via a temp file + rename so readers never see partial files."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def tensor_to_bytes(array: np.ndarray) -> bytes:
    """Encode an f32/f64 array; raises DataError for other dtypes."""
    arr = np.ascontiguousarray(array)
    dt = arr.dtype.newbyteorder("<")
    if dt not in _DTYPE_CODES:
        raise DataError(f"unsupported tensor dtype {arr.dtype}; use float32 or float64")
    header = _TENSOR_MAGIC + struct.pack("<BBB", _VERSION, _DTYPE_CODES[dt], arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + arr.astype(dt, copy=False).tobytes()


def tensor_from_bytes(payload: bytes) -> np.ndarray:
    if payload[:4] != _TENSOR_MAGIC:
        raise DataError("not a tensor file (bad magic)")
    version, code, rank = struct.unpack_from("<BBB", payload, 4)
    if version != _VERSION:
        raise DataError(f"unsupported tensor file version {version}")
    if code not in _CODE_DTYPES:
        raise DataError(f"unknown dtype code {code}")
    dims = struct.unpack_from(f"<{rank}I", payload, 7)
    offset = 7 + 4 * rank
    dt = _CODE_DTYPES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dt.itemsize if rank else dt.itemsize
    if rank == 0:
        dims = ()
        expected = dt.itemsize
    if len(payload) - offset != expected:
        raise DataError(f"tensor payload length {len(payload) - offset} != expected {expected}")
    return np.frombuffer(payload[offset:], dtype=dt).reshape(dims).copy()


def write_tensor(path: str | Path, array: np.ndarray) -> None:
    atomic_write_bytes(path, tensor_to_bytes(array))


def read_tensor(path: str | Path) -> np.ndarray:
    try:
        payload = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read tensor file {path}: {e}") from e
    return tensor_from_bytes(payload)


def complex_cube_to_planes(cube: np.ndarray) -> np.ndarray:
    """Complex (A, S, C) cube -> real (A, S, C, 2) interleaved planes, f32."""
    out = np.empty(cube.shape + (2,), dtype=np.float32)
    out[..., 0] = cube.real
    out[..., 1] = cube.imag
    return out


def planes_to_complex_cube(planes: np.ndarray) -> np.ndarray:
    if planes.ndim < 1 or planes.shape[-1] != 2:
        raise DataError(f"radar tensor must have trailing dim 2, got shape {planes.shape}")
    return planes[..., 0].astype(np.complex64) + 1j * planes[..., 1].astype(np.complex64)


# ---------------------------------------------------------------------------
# checkpoint container
# ---------------------------------------------------------------------------

def write_checkpoint(path: str | Path, entries: dict[str, np.ndarray], metadata: dict[str, str]) -> None:
    """Named tensors + a text metadata block, in one atomic file."""
    meta_text = "".join(f"{k}={v}\n" for k, v in metadata.items())
    meta_bytes = meta_text.encode("utf-8")
    blob = _CHECKPOINT_MAGIC + struct.pack("<B", _VERSION)
    blob += struct.pack("<I", len(meta_bytes)) + meta_bytes
    blob += struct.pack("<I", len(entries))
    for name, arr in entries.items():
        name_bytes = name.encode("utf-8")
        tensor = tensor_to_bytes(arr)
        blob += struct.pack("<H", len(name_bytes)) + name_bytes
        blob += struct.pack("<I", len(tensor)) + tensor
    atomic_write_bytes(path, blob)


def read_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    try:
        payload = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read checkpoint {path}: {e}") from e
    if payload[:4] != _CHECKPOINT_MAGIC:
        raise DataError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<B", payload, 4)
    if version != _VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<I", payload, 5)
    offset = 9
    meta_text = payload[offset : offset + meta_len].decode("utf-8")
    offset += meta_len
    metadata = {}
    for line in meta_text.splitlines():
        if line:
            k, _, v = line.partition("=")
            metadata[k] = v
    (n_entries,) = struct.unpack_from("<I", payload, offset)
    offset += 4
    entries = {}
    for _ in range(n_entries):
        (name_len,) = struct.unpack_from("<H", payload, offset)
        offset += 2
        name = payload[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (tensor_len,) = struct.unpack_from("<I", payload, offset)
        offset += 4
        entries[name] = tensor_from_bytes(payload[offset : offset + tensor_len])
        offset += tensor_len
    return entries, metadata


# ---------------------------------------------------------------------------
# dataset manifests
# ---------------------------------------------------------------------------

N_INSTANCES = 5


@dataclass
class SampleRecord:
    """One dataset sample: file references plus GPS fixes and optional label.

    In a raw manifest the lidar paths point at N x 4 point clouds and the
    radar paths at complex IQ cubes; in a preprocessed manifest they point at
    BEV images and range-angle/velocity maps, and ``angles_path`` carries the
    calibrated GPS features.
    """

    sample_id: str
    scenario_id: int
    image_paths: list[str]
    lidar_paths: list[str]
    radar_paths: list[str]
    gps: list[tuple[float, float]]  # [(lat, lon), (lat, lon)]
    label: int | None = None
    power_path: str | None = None
    angles_path: str | None = None


@dataclass
class ScenarioMeta:
    """Per-scenario metadata embedded in manifest headers."""

    scenario_id: int
    theta: float
    bs_latitude: float
    bs_longitude: float
    night: bool = False


@dataclass
class DatasetManifest:
    kind: str  # "raw" or "prep"
    root: Path
    scenarios: dict[int, ScenarioMeta]
    samples: list[SampleRecord] = field(default_factory=list)

    def resolve(self, rel: str) -> Path:
        return self.root / rel


def _sample_to_line(s: SampleRecord, kind: str) -> str:
    fields = [s.sample_id, str(s.scenario_id)]
    fields += s.image_paths + s.lidar_paths + s.radar_paths
    for lat, lon in s.gps:
        fields += [repr(lat), repr(lon)]
    if kind == "prep":
        fields.append(s.angles_path or "-")
    fields.append(str(s.label) if s.label is not None else "-")
    fields.append(s.power_path or "-")
    return ",".join(fields)


def _sample_from_line(line: str, kind: str) -> SampleRecord:
    f = line.split(",")
    n_paths = 3 * N_INSTANCES
    expected = 2 + n_paths + 4 + (1 if kind == "prep" else 0) + 2
    if len(f) != expected:
        raise DataError(f"manifest record has {len(f)} fields, expected {expected}: {line[:80]}")
    pos = 2 + n_paths
    gps = [(float(f[pos]), float(f[pos + 1])), (float(f[pos + 2]), float(f[pos + 3]))]
    pos += 4
    angles_path = None
    if kind == "prep":
        angles_path = None if f[pos] == "-" else f[pos]
        pos += 1
    label = None if f[pos] == "-" else int(f[pos])
    power_path = None if f[pos + 1] == "-" else f[pos + 1]
    if label is not None and not 1 <= label <= 64:
        raise DataError(f"label {label} outside 1..64 in record {f[0]}")
    return SampleRecord(
        sample_id=f[0],
        scenario_id=int(f[1]),
        image_paths=f[2 : 2 + N_INSTANCES],
        lidar_paths=f[2 + N_INSTANCES : 2 + 2 * N_INSTANCES],
        radar_paths=f[2 + 2 * N_INSTANCES : 2 + 3 * N_INSTANCES],
        gps=gps,
        label=label,
        power_path=power_path,
        angles_path=angles_path,
    )


def write_manifest(path: str | Path, manifest: DatasetManifest) -> None:
    lines = [f"#manifest kind={manifest.kind}"]
    for sid in sorted(manifest.scenarios):
        m = manifest.scenarios[sid]
        lines.append(
            f"#scenario id={m.scenario_id} theta={m.theta!r} "
            f"bs_lat={m.bs_latitude!r} bs_lon={m.bs_longitude!r} night={int(m.night)}"
        )
    for s in manifest.samples:
        lines.append(_sample_to_line(s, manifest.kind))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read manifest {path}: {e}") from e
    kind = None
    scenarios: dict[int, ScenarioMeta] = {}
    samples: list[SampleRecord] = []
    seen_ids: set[str] = set()
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#manifest"):
            for token in line.split()[1:]:
                k, _, v = token.partition("=")
                if k == "kind":
                    kind = v
            continue
        if line.startswith("#scenario"):
            kv = dict(token.partition("=")[::2] for token in line.split()[1:])
            sid = int(kv["id"])
            scenarios[sid] = ScenarioMeta(
                scenario_id=sid,
                theta=float(kv["theta"]),
                bs_latitude=float(kv["bs_lat"]),
                bs_longitude=float(kv["bs_lon"]),
                night=bool(int(kv.get("night", "0"))),
            )
            continue
        if line.startswith("#"):
            continue
        if kind not in ("raw", "prep"):
            raise DataError(f"manifest {path} missing '#manifest kind=raw|prep' header")
        samples.append(_sample_from_line(line, kind))
    if kind not in ("raw", "prep"):
        raise DataError(f"manifest {path} missing '#manifest kind=raw|prep' header")
    for s in samples:
        if s.sample_id in seen_ids:
            raise DataError(f"duplicate sample id {s.sample_id} in manifest")
        seen_ids.add(s.sample_id)
    return DatasetManifest(kind=kind, root=path.parent, scenarios=scenarios, samples=samples)


def check_manifest_files(manifest: DatasetManifest) -> None:
    """Verify every referenced file exists; raises DataError otherwise."""
    for s in manifest.samples:
        paths = s.image_paths + s.lidar_paths + s.radar_paths
        if s.power_path:
            paths.append(s.power_path)
        if s.angles_path:
            paths.append(s.angles_path)
        for rel in paths:
            if not manifest.resolve(rel).exists():
                raise DataError(f"sample {s.sample_id}: missing file {rel}")
