"""Parameter checkpoint archive.

A checkpoint is a zip archive (stored, not compressed) holding:

* ``manifest.json`` -- ``{"format": "shufflesod-ckpt", "version": 1,
  "meta": {...}, "entries": [{"name", "shape", "file"}, ...]}``
* one ``tensors/<index>.f8`` member per entry: the raw little-endian
  float64 payload in row-major order.

Member timestamps are pinned so identical states give identical bytes.
"""
import json
import zipfile

import numpy as np

from ..errors import CheckpointError

FORMAT = "shufflesod-ckpt"
VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


def _member(name):
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    return info


def save_checkpoint(path, state, meta=None):
    entries = []
    payloads = []
    for i, (name, arr) in enumerate(state.items()):
        arr = np.asarray(arr, dtype="<f8")
        member = f"tensors/{i:05d}.f8"
        entries.append({"name": name, "shape": list(arr.shape), "file": member})
        payloads.append((member, arr.tobytes()))
    manifest = {"format": FORMAT, "version": VERSION, "meta": meta or {}, "entries": entries}
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr(_member("manifest.json"), json.dumps(manifest, indent=1, sort_keys=True))
        for member, data in payloads:
            zf.writestr(_member(member), data)


def load_checkpoint(path):
    """Return ``(state, meta)`` with state an ordered dict of float64 arrays."""
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            if manifest.get("format") != FORMAT:
                raise CheckpointError(f"{path}: not a {FORMAT} archive")
            state = {}
            for entry in manifest["entries"]:
                raw = zf.read(entry["file"])
                arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
                expected = int(np.prod(entry["shape"], dtype=np.int64))
                if arr.size != expected:
                    raise CheckpointError(f"{path}: entry {entry['name']!r} has {arr.size} values, expected {expected}")
                state[entry["name"]] = arr.reshape(entry["shape"])
    except (OSError, KeyError, zipfile.BadZipFile, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return state, manifest.get("meta", {})
