"""Deterministic JSON/CSV writers and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
import time
from contextlib import contextmanager

import numpy as np

FLOAT_FORMAT = ".17g"


def _plain(obj):
    """Convert numpy and complex values into JSON-ready builtins."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        c = complex(obj)
        return float(c.real) if c.imag == 0 else [float(c.real), float(c.imag)]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        text = format(obj, FLOAT_FORMAT)
        if "e" not in text and "." not in text and "inf" not in text:
            text += ".0"
        return text
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, dict)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        inner = (",\n").join(pad + _encode(v, indent, level + 1) for v in obj)
        return "[\n" + inner + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = (",\n").join(f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}"
                             for k, v in obj.items())
        return "{\n" + inner + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON text with every float printed to 17 significant digits."""
    return _encode(_plain(obj), indent, 0) + "\n"


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Config echo, versions, stage timings and a checksummed file inventory."""

    def __init__(self, config, out_dir):
        self.config = config
        self.out_dir = out_dir
        self.timings = {}
        self.files = []
        os.makedirs(out_dir, exist_ok=True)

    @contextmanager
    def stage(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def write_json(self, name, obj):
        path = self.path(name)
        with open(path, "w") as fh:
            fh.write(dumps(obj))
        self.files.append(name)
        return path

    def write_csv(self, name, header, rows):
        path = self.path(name)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format(v, FLOAT_FORMAT) if isinstance(v, float) else v
                                 for v in row])
        self.files.append(name)
        return path

    def versions(self):
        import scipy

        from . import __version__, kernels

        return {
            "floquet_lab": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "kernel_backend": kernels.BACKEND,
        }

    def finish(self):
        inventory = [{"path": f, "bytes": os.path.getsize(self.path(f)), "sha256": sha256(self.path(f))}
                     for f in self.files]
        data = {
            "config": self.config.to_dict(),
            "versions": self.versions(),
            "timings": self.timings,
            "files": inventory,
        }
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w") as fh:
            fh.write(dumps(data))
        return data


def verify_manifest(out_dir):
    """Every listed file exists and matches its checksum."""
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        data = json.load(fh)
    bad = []
    for item in data["files"]:
        p = os.path.join(out_dir, item["path"])
        if not os.path.exists(p) or sha256(p) != item["sha256"]:
            bad.append(item["path"])
    return bad
