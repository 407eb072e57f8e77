"""Report bundles: a directory of JSON/CSV outputs plus a reproducibility manifest.

Only ``manifest.json`` carries a timestamp; every other file is a pure
function of the recorded command and parameters.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import tempfile

from . import __version__
from .kernels import BACKEND

MANIFEST = "manifest.json"
REPORT = "report.json"


def _jsonable(obj):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, default=_jsonable, indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write(path: str, text: str) -> None:
    """Write-then-rename so readers never see a partial file."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Bundle:
    """Collects report sections and CSV tables, then writes them with a manifest."""

    def __init__(self, command: str, params: dict, seed: int, fmt: str = "both"):
        if fmt not in ("json", "csv", "both"):
            raise ValueError("format must be json, csv or both")
        self.command = command
        self.params = params
        self.seed = seed
        self.fmt = fmt
        self.sections: dict = {}
        self.tables: dict[str, str] = {}
        self.extra_files: dict[str, str] = {}
        self.argv: list[str] | None = None  # command line that regenerates this bundle

    def add(self, name: str, payload) -> None:
        self.sections[name] = payload

    def add_csv(self, name: str, text: str) -> None:
        if not text.startswith("#"):
            raise ValueError(f"CSV {name} lacks a provenance header row")
        self.tables[name if name.endswith(".csv") else name + ".csv"] = text

    def add_file(self, name: str, text: str) -> None:
        self.extra_files[name] = text

    def files(self) -> dict[str, str]:
        out = dict(self.extra_files)
        if self.fmt in ("json", "both"):
            out[REPORT] = dumps({"command": self.command, "params": self.params,
                                 "seed": self.seed, "sections": self.sections})
        if self.fmt in ("csv", "both"):
            out.update(self.tables)
        return out

    def write(self, out_dir: str) -> dict:
        files = self.files()
        for name, text in sorted(files.items()):
            atomic_write(os.path.join(out_dir, name), text)
        manifest = {
            "tool": "propgraph",
            "version": __version__,
            "backend": BACKEND,
            "command": self.command,
            "argv": self.argv,
            "params": self.params,
            "seed": self.seed,
            "format": self.fmt,
            "config_hash": hashlib.sha256(dumps(self.params).encode()).hexdigest()[:16],
            "files": {k: hashlib.sha256(v.encode()).hexdigest() for k, v in sorted(files.items())},
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        }
        atomic_write(os.path.join(out_dir, MANIFEST), dumps(manifest))
        return manifest


def load_manifest(path: str) -> dict:
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def compare_bundles(dir_a: str, dir_b: str) -> list[str]:
    """Names of files that differ (manifest compared without its timestamp)."""
    names = sorted(set(os.listdir(dir_a)) | set(os.listdir(dir_b)))
    diffs = []
    for name in names:
        pa, pb = os.path.join(dir_a, name), os.path.join(dir_b, name)
        if not (os.path.isfile(pa) and os.path.isfile(pb)):
            diffs.append(name)
            continue
        with open(pa, "rb") as fa, open(pb, "rb") as fb:
            a, b = fa.read(), fb.read()
        if name == MANIFEST:
            ja, jb = json.loads(a), json.loads(b)
            ja.pop("created", None)
            jb.pop("created", None)
            if ja != jb:
                diffs.append(name)
        elif a != b:
            diffs.append(name)
    return diffs
