"""``.ldw`` single-file model container.

Layout::

    b"LDWMODEL"                   8-byte magic
    uint32 little-endian          manifest length in bytes
    manifest                      UTF-8 JSON: tensor table + graph topology
    payload                       raw little-endian float32 tensors

Each tensor-table entry carries ``name``, ``dtype``, ``shape``, ``offset``
and ``nbytes``; offsets are relative to the start of the payload.
"""

import json
import struct

import numpy as np

from .model import GraphModel, Node, NormalizationParams

MAGIC = b"LDWMODEL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sI")


class LdwError(ValueError):
    """Malformed or inconsistent ``.ldw`` container."""


def _graph_manifest(model):
    norm = model.normalization
    return {
        "nodes": [{"id": n.id, "op": n.op, "inputs": list(n.inputs), "params": n.params}
                  for n in model.nodes],
        "inputs": model.inputs,
        "outputs": model.outputs,
        "input_resolution": list(model.input_resolution),
        "normalization": None if norm is None else {"mean": list(norm.mean), "std": list(norm.std)},
    }


def dumps(model):
    table = []
    chunks = []
    offset = 0
    for name, arr in model.weights.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        table.append({"name": name, "dtype": "float32", "shape": list(arr.shape),
                      "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    manifest = {"format_version": FORMAT_VERSION, "tensors": table, "graph": _graph_manifest(model)}
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(MAGIC, len(blob)) + blob + b"".join(chunks)


def loads(buf):
    if len(buf) < _HEADER.size:
        raise LdwError("corrupt header: file shorter than the 12-byte header")
    magic, mlen = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise LdwError(f"corrupt header: bad magic {magic!r}")
    if _HEADER.size + mlen > len(buf):
        raise LdwError(f"truncated manifest: header declares {mlen} bytes")
    try:
        manifest = json.loads(buf[_HEADER.size:_HEADER.size + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LdwError(f"corrupt manifest: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise LdwError(f"unsupported format_version {manifest.get('format_version')!r}")

    payload = memoryview(buf)[_HEADER.size + mlen:]
    weights = {}
    for entry in manifest["tensors"]:
        name = entry["name"]
        if entry["dtype"] != "float32":
            raise LdwError(f"tensor {name!r}: unsupported dtype {entry['dtype']!r}")
        shape = tuple(int(d) for d in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        if count * 4 != entry["nbytes"]:
            raise LdwError(f"tensor {name!r}: shape/size mismatch, shape {shape} needs "
                           f"{count * 4} bytes but manifest declares {entry['nbytes']}")
        start = entry["offset"]
        end = start + entry["nbytes"]
        if start < 0 or end > len(payload):
            raise LdwError(f"tensor {name!r}: truncated tensor data "
                           f"(needs bytes {start}..{end}, payload has {len(payload)})")
        weights[name] = np.frombuffer(payload[start:end], dtype="<f4").astype(np.float32).reshape(shape)

    g = manifest["graph"]
    norm = g.get("normalization")
    return GraphModel(
        nodes=[Node(n["id"], n["op"], tuple(n["inputs"]), n["params"]) for n in g["nodes"]],
        weights=weights,
        inputs=g["inputs"],
        outputs=g["outputs"],
        input_resolution=tuple(g["input_resolution"]),
        normalization=None if norm is None else NormalizationParams(norm["mean"], norm["std"]),
    )


def save_model(model, path):
    with open(path, "wb") as f:
        f.write(dumps(model))


def load_model(path):
    with open(path, "rb") as f:
        return loads(f.read())


def payload_bytes(path):
    """Size of the tensor payload of a saved model (file size minus header and manifest)."""
    with open(path, "rb") as f:
        buf = f.read()
    _, mlen = _HEADER.unpack_from(buf)
    return len(buf) - _HEADER.size - mlen
