"""
Container layout shared by checkpoints and synthetic archives::

    <magic line>\\n
    <header: one line of JSON, includes "arrays": [[name, shape], ...]>\\n
    <little-endian f32 arrays, concatenated in header order>
    <optional footer: one line of JSON>\\n
"""
import json
import math
from typing import Any, Mapping

import numpy as np

from src.app.core.errors import CheckpointError

_F32_LE = np.dtype("<f4")


def encode_container(
        magic: str,
        header: Mapping[str, Any],
        arrays: Mapping[str, np.ndarray],
        footer: Mapping[str, Any] | None = None,
) -> bytes:
    if "arrays" in header:
        raise ValueError("header key 'arrays' is reserved")

    full_header = dict(header)
    full_header["arrays"] = [[name, list(array.shape)] for name, array in arrays.items()]

    chunks = [
        magic.encode("ascii") + b"\n",
        json.dumps(full_header, sort_keys=True).encode("utf-8") + b"\n",
    ]
    for array in arrays.values():
        chunks.append(np.ascontiguousarray(array, dtype=_F32_LE).tobytes())
    if footer is not None:
        chunks.append(json.dumps(dict(footer), sort_keys=True).encode("utf-8") + b"\n")
    return b"".join(chunks)


def decode_container(
        magic: str,
        blob: bytes,
        source: str = "container",
) -> tuple[dict[str, Any], dict[str, np.ndarray], dict[str, Any] | None]:
    first_end = blob.find(b"\n")
    if first_end < 0 or blob[:first_end].decode("ascii", errors="replace") != magic:
        raise CheckpointError(f"{source}: not a {magic} file")

    header_end = blob.find(b"\n", first_end + 1)
    if header_end < 0:
        raise CheckpointError(f"{source}: truncated header")
    try:
        header = json.loads(blob[first_end + 1:header_end].decode("utf-8"))
        layout = [(str(name), tuple(int(extent) for extent in shape)) for name, shape in header.pop("arrays")]
    except (ValueError, KeyError, TypeError) as e:
        raise CheckpointError(f"{source}: malformed header ({e})") from e

    offset = header_end + 1
    arrays: dict[str, np.ndarray] = {}
    for name, shape in layout:
        count = math.prod(shape)
        nbytes = count * _F32_LE.itemsize
        if offset + nbytes > len(blob):
            raise CheckpointError(f"{source}: truncated payload at array '{name}'")
        flat = np.frombuffer(blob, dtype=_F32_LE, count=count, offset=offset)
        arrays[name] = flat.astype(np.float32).reshape(shape)
        offset += nbytes

    footer = None
    rest = blob[offset:].strip()
    if rest:
        try:
            footer = json.loads(rest.decode("utf-8"))
        except ValueError as e:
            raise CheckpointError(f"{source}: malformed footer ({e})") from e
    return header, arrays, footer
