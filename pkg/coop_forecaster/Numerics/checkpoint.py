"""
Checkpoint file layout:

    COOP-CKPT 1
    seed <rng seed>
    tensors <count>
    <name> f64 <extent>x<extent>...   (one line per tensor, "scalar" for 0-d)
    END
    <raw little-endian float64 payloads, manifest order>
    <FNV-1a 64-bit checksum of the payload bytes, little-endian>
"""

import os
import struct

import numpy as np

from coop_forecaster.Numerics.params import ParamStore
from coop_forecaster.Utils.errors import CheckpointIncompatibleError, CorruptCheckpointError

MAGIC = "COOP-CKPT 1"
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1


def fnv1a_64(payload: bytes) -> int:
    # Byte-serial recurrence; each step depends on the full previous digest
    digest, prime, mask = FNV_OFFSET, FNV_PRIME, MASK64
    for byte in payload:
        digest = ((digest ^ byte) * prime) & mask
    return digest


def _format_shape(shape: tuple[int, ...]) -> str:
    return "x".join(str(extent) for extent in shape) if shape else "scalar"


def _parse_shape(text: str) -> tuple[int, ...]:
    if text == "scalar":
        return ()
    return tuple(int(extent) for extent in text.split("x"))


def save_checkpoint(params: ParamStore, path: str) -> None:
    names = list(params)
    header = [MAGIC, f"seed {params.rng_seed}", f"tensors {len(names)}"]
    header += [f"{name} f64 {_format_shape(params[name].shape)}" for name in names]
    header.append("END")
    payload = b"".join(params[name].data.astype("<f8").tobytes(order="C") for name in names)

    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as file:
        file.write(("\n".join(header) + "\n").encode("utf-8"))
        file.write(payload)
        file.write(struct.pack("<Q", fnv1a_64(payload)))
    os.replace(tmp_path, path)


def load_checkpoint(path: str, expected: ParamStore | None = None) -> ParamStore:
    with open(path, "rb") as file:
        blob = file.read()

    manifest: list[tuple[str, tuple[int, ...]]] = []
    offset = 0
    lines = []
    while True:
        end = blob.find(b"\n", offset)
        if end < 0:
            raise CorruptCheckpointError(f"{path}: manifest is not terminated")
        line = blob[offset:end].decode("utf-8", errors="replace")
        offset = end + 1
        if line == "END":
            break
        lines.append(line)

    if not lines or lines[0] != MAGIC:
        raise CorruptCheckpointError(f"{path}: not a checkpoint file")
    try:
        seed = int(lines[1].split()[1])
        count = int(lines[2].split()[1])
        for line in lines[3:]:
            name, dtype, shape_text = line.split(" ")
            if dtype != "f64":
                raise CorruptCheckpointError(f"{path}: unsupported dtype {dtype} for {name}")
            manifest.append((name, _parse_shape(shape_text)))
    except (IndexError, ValueError) as exc:
        raise CorruptCheckpointError(f"{path}: malformed manifest ({exc})") from exc
    if len(manifest) != count:
        raise CorruptCheckpointError(f"{path}: manifest lists {len(manifest)} tensors, header says {count}")

    payload_size = sum(8 * int(np.prod(shape, dtype=np.int64)) for _, shape in manifest)
    if len(blob) != offset + payload_size + 8:
        raise CorruptCheckpointError(
            f"{path}: expected {offset + payload_size + 8} bytes, found {len(blob)} (truncated or padded)"
        )
    payload = blob[offset:offset + payload_size]
    (stored_checksum,) = struct.unpack("<Q", blob[offset + payload_size:])
    if fnv1a_64(payload) != stored_checksum:
        raise CorruptCheckpointError(f"{path}: checksum mismatch")

    if expected is not None:
        _check_compatible(path, manifest, expected)

    params = ParamStore(seed)
    cursor = 0
    for name, shape in manifest:
        size = 8 * int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(payload[cursor:cursor + size], dtype="<f8").astype(np.float64).reshape(shape)
        params.add(name, values)
        cursor += size
    return params


def _check_compatible(path: str, manifest: list[tuple[str, tuple[int, ...]]], expected: ParamStore) -> None:
    stored = dict(manifest)
    for name in expected:
        if name not in stored:
            raise CheckpointIncompatibleError(f"{path}: tensor {name} is missing from the checkpoint")
        if tuple(stored[name]) != tuple(expected[name].shape):
            raise CheckpointIncompatibleError(
                f"{path}: tensor {name} has shape {stored[name]}, model expects {expected[name].shape}"
            )
    extra = sorted(set(stored) - set(expected))
    if extra:
        raise CheckpointIncompatibleError(f"{path}: tensor {extra[0]} is not part of the model")
