"""Versioned binary container for trained models.

Layout: 8-byte magic "LUMENEQ1", a little-endian uint32 length prefix, a
human-readable key = value metadata block (architecture, normalization
constants, provenance hashes), every persistent tensor as raw
little-endian float32 in declaration order, and a trailing 64-bit
BLAKE2b checksum of everything before it.
"""

import hashlib
import struct

import numpy as np

from .errors import (ModelArchitectureError, ModelChecksumError,
                     ModelFormatError, ModelTruncatedError)
from .model import Architecture, EqualizerNet

MAGIC = b"LUMENEQ1"
_CHECKSUM_BYTES = 8


def _checksum(data):
    return hashlib.blake2b(data, digest_size=_CHECKSUM_BYTES).digest()


def _metadata_text(model, norm_mean, norm_std, channel_fingerprint, seed):
    arch = model.arch
    lines = [arch.canonical_text().rstrip("\n")]
    lines.append(f"arch.fingerprint = {arch.fingerprint()}")
    lines.append(f"norm.mean = {float(norm_mean)!r}")
    lines.append(f"norm.std = {float(norm_std)!r}")
    lines.append(f"channel.fingerprint = {channel_fingerprint}")
    lines.append(f"train.seed = {int(seed)}")
    return "\n".join(lines) + "\n"


def _parse_metadata(text):
    fields = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ModelFormatError(f"malformed metadata line: {line!r}")
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    return fields


def _arch_from_fields(fields):
    def tup(key, cast):
        return tuple(cast(v) for v in fields[key].split(","))

    try:
        arch = Architecture(
            window_length=int(fields["arch.window_length"]),
            conv_filters=tup("arch.conv_filters", int),
            kernel_sizes=tup("arch.kernel_sizes", int),
            lstm_units=tup("arch.lstm_units", int),
            dense_units=int(fields["arch.dense_units"]),
            dropout_rates=tup("arch.dropout_rates", float),
            l2=float(fields["arch.l2"]),
        )
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"incomplete architecture metadata: {exc}") from exc
    if arch.fingerprint() != fields.get("arch.fingerprint"):
        raise ModelArchitectureError(
            "stored architecture hash does not match the stored architecture")
    return arch


def save_model(model, norm_mean, norm_std, channel_fingerprint, seed, path):
    """Write the container; the round trip is bit-exact for float32 models."""
    meta = _metadata_text(model, norm_mean, norm_std,
                          channel_fingerprint, seed).encode("utf-8")
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", len(meta))
    blob += meta
    for _, tensor in model.variables():
        blob += np.ascontiguousarray(tensor, dtype="<f4").tobytes()
    blob += _checksum(bytes(blob))
    with open(path, "wb") as fh:
        fh.write(blob)


def load_model(path):
    """Read a container back into a model.

    Returns ``(model, metadata_fields)`` where the fields include the
    normalization constants and provenance entries written at save time.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 4 + _CHECKSUM_BYTES:
        raise ModelTruncatedError(f"{path}: file shorter than any valid container")
    if blob[:len(MAGIC)] != MAGIC:
        raise ModelFormatError(
            f"{path}: bad magic {blob[:len(MAGIC)]!r}, expected {MAGIC!r}")
    (meta_len,) = struct.unpack_from("<I", blob, len(MAGIC))
    meta_start = len(MAGIC) + 4
    if meta_start + meta_len + _CHECKSUM_BYTES > len(blob):
        raise ModelTruncatedError(f"{path}: metadata block extends past the file")
    fields = _parse_metadata(blob[meta_start:meta_start + meta_len].decode("utf-8"))
    arch = _arch_from_fields(fields)

    model = EqualizerNet(arch, dtype=np.float32)
    model.init_params(np.random.default_rng(0))
    tensor_bytes = sum(t.size for _, t in model.variables()) * 4
    expected = meta_start + meta_len + tensor_bytes + _CHECKSUM_BYTES
    if len(blob) < expected:
        raise ModelTruncatedError(
            f"{path}: {len(blob)} bytes, a full container needs {expected}")
    if len(blob) > expected:
        raise ModelFormatError(f"{path}: {len(blob) - expected} trailing bytes")
    payload = blob[:-_CHECKSUM_BYTES]
    if _checksum(payload) != blob[-_CHECKSUM_BYTES:]:
        raise ModelChecksumError(f"{path}: checksum mismatch")
    offset = meta_start + meta_len
    for name, tensor in model.variables():
        flat = np.frombuffer(payload, dtype="<f4", count=tensor.size, offset=offset)
        tensor[:] = flat.reshape(tensor.shape)
        offset += tensor.size * 4
    try:
        fields["norm.mean"] = float(fields["norm.mean"])
        fields["norm.std"] = float(fields["norm.std"])
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"{path}: missing normalization metadata") from exc
    return model, fields
