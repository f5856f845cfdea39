"""Reading and writing detection corpora, ground truth and CSV reports.

Corpus file (UTF-8, one JSON object per line)::

    {"format": "detmerge-corpus", "version": 1, "name": ..., "m": 20,
     "classes": [...], "images": [{"image_id", "width", "height", "regime", "n"}, ...]}
    {"image_id": "img0", "sample_index": 0, "x1": .., "y1": .., "x2": .., "y2": .., "scores": [...]}
    ...

Ground-truth file: one ``{"image_id", "class_index", "x1", "y1", "x2", "y2"}`` per line.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .errors import MalformedInput
from .metrics import GroundTruthObject
from .model import BoundingBox, Detection, Regime, SampleSet, validate_sample_set

FORMAT_TAG = "detmerge-corpus"
FORMAT_VERSION = 1
COORD_DIGITS = 4

REPORT_COLUMNS = (
    "method", "affinity", "theta", "dataset_regimes", "uncertainty_kind", "map", "ue_min",
    "delta_star", "auroc", "aupr_in", "aupr_out", "n_correct", "n_closed_err", "n_open_err",
)
_KEY_COLUMNS = REPORT_COLUMNS[:5]


@dataclass(frozen=True)
class ImageEntry:
    image_id: str
    width: float
    height: float
    regime: Regime
    n: int


@dataclass(frozen=True)
class CorpusManifest:
    name: str
    classes: tuple[str, ...]
    images: tuple[ImageEntry, ...]

    @property
    def m(self) -> int:
        return len(self.classes)

    def regimes(self) -> dict[str, Regime]:
        return {e.image_id: e.regime for e in self.images}


def _coord(value: float) -> float:
    return round(float(value), COORD_DIGITS)


def _records(text: str) -> list[str]:
    # Records end at "\n" only; str.splitlines would also split inside JSON
    # strings holding characters such as U+0085 or U+2028.
    return [ln[:-1] if ln.endswith("\r") else ln for ln in text.split("\n")]


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def manifest_for(name: str, classes: Sequence[str], sample_sets: Sequence[SampleSet]) -> CorpusManifest:
    entries = tuple(
        ImageEntry(s.image_id, s.image_width, s.image_height, s.regime, s.n_samples) for s in sample_sets
    )
    return CorpusManifest(name, tuple(classes), entries)


def dumps_corpus(sample_sets: Sequence[SampleSet], manifest: CorpusManifest) -> str:
    lines = [_dumps({
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "name": manifest.name,
        "m": manifest.m,
        "classes": list(manifest.classes),
        "images": [
            {"image_id": e.image_id, "width": e.width, "height": e.height,
             "regime": e.regime.value, "n": e.n}
            for e in manifest.images
        ],
    })]
    for s in sample_sets:
        for sample in s.samples:
            for det in sample:
                b = det.box
                lines.append(_dumps({
                    "image_id": s.image_id,
                    "sample_index": det.sample_index,
                    "x1": _coord(b.x1), "y1": _coord(b.y1), "x2": _coord(b.x2), "y2": _coord(b.y2),
                    "scores": list(det.scores),
                }))
    return "\n".join(lines) + "\n"


def write_corpus(path: str | Path, sample_sets: Sequence[SampleSet], manifest: CorpusManifest) -> None:
    Path(path).write_text(dumps_corpus(sample_sets, manifest), encoding="utf-8")


def _number(rec: Mapping, key: str, where: str) -> float:
    value = rec.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise MalformedInput(f"{where}: field {key!r} must be a finite number")
    return float(value)


def _integer(rec: Mapping, key: str, where: str) -> int:
    value = rec.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedInput(f"{where}: field {key!r} must be an integer")
    return value


def _parse_line(line: str, where: str) -> dict:
    try:
        rec = json.loads(line)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise MalformedInput(f"{where}: invalid JSON ({exc})") from None
    if not isinstance(rec, dict):
        raise MalformedInput(f"{where}: expected a JSON object")
    return rec


def _parse_manifest(rec: dict, where: str) -> CorpusManifest:
    if rec.get("format") != FORMAT_TAG or rec.get("version") != FORMAT_VERSION:
        raise MalformedInput(f"{where}: not a {FORMAT_TAG} v{FORMAT_VERSION} manifest")
    classes = rec.get("classes")
    if not isinstance(classes, list) or not all(isinstance(c, str) for c in classes):
        raise MalformedInput(f"{where}: 'classes' must be a list of strings")
    m = _integer(rec, "m", where)
    if m < 1 or m != len(classes):
        raise MalformedInput(f"{where}: m={m} does not match {len(classes)} class names")
    images = rec.get("images")
    if not isinstance(images, list):
        raise MalformedInput(f"{where}: 'images' must be a list")
    entries, seen = [], set()
    for i, img in enumerate(images):
        w = f"{where}, images[{i}]"
        if not isinstance(img, dict):
            raise MalformedInput(f"{w}: expected an object")
        image_id = img.get("image_id")
        if not isinstance(image_id, str):
            raise MalformedInput(f"{w}: 'image_id' must be a string")
        if image_id in seen:
            raise MalformedInput(f"{w}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        n = _integer(img, "n", w)
        if n < 1:
            raise MalformedInput(f"{w}: sample count must be >= 1")
        regime = Regime.parse(img.get("regime", ""))
        entries.append(ImageEntry(image_id, _number(img, "width", w), _number(img, "height", w), regime, n))
    name = rec.get("name", "")
    if not isinstance(name, str):
        raise MalformedInput(f"{where}: 'name' must be a string")
    return CorpusManifest(name, tuple(classes), tuple(entries))


def loads_corpus(text: str, source: str = "<corpus>") -> tuple[list[SampleSet], CorpusManifest]:
    try:
        return _loads_corpus(text, source)
    except (OverflowError, TypeError) as exc:
        raise MalformedInput(f"{source}: {exc}") from None


def _loads_corpus(text: str, source: str) -> tuple[list[SampleSet], CorpusManifest]:
    lines = [(i + 1, ln) for i, ln in enumerate(_records(text)) if ln.strip()]
    if not lines:
        raise MalformedInput(f"{source}: empty corpus file (missing manifest)")
    lineno, first = lines[0]
    manifest = _parse_manifest(_parse_line(first, f"{source}:{lineno}"), f"{source}:{lineno}")
    entries = {e.image_id: e for e in manifest.images}
    buckets: dict[str, list[list[Detection]]] = {e.image_id: [[] for _ in range(e.n)] for e in manifest.images}
    for lineno, line in lines[1:]:
        where = f"{source}:{lineno}"
        rec = _parse_line(line, where)
        image_id = rec.get("image_id")
        if image_id not in entries:
            raise MalformedInput(f"{where}: unknown image_id {image_id!r}")
        idx = _integer(rec, "sample_index", where)
        if not 0 <= idx < entries[image_id].n:
            raise MalformedInput(f"{where}: sample_index {idx} out of range")
        scores = rec.get("scores")
        if not isinstance(scores, list) or len(scores) != manifest.m:
            raise MalformedInput(f"{where}: 'scores' must list exactly m={manifest.m} numbers")
        values = []
        for s in scores:
            if isinstance(s, bool) or not isinstance(s, (int, float)) or not math.isfinite(s):
                raise MalformedInput(f"{where}: non-numeric score")
            values.append(float(s))
        box = BoundingBox(*(_number(rec, k, where) for k in ("x1", "y1", "x2", "y2")))
        buckets[image_id][idx].append(Detection(box, tuple(values), idx))
    sample_sets = []
    for e in manifest.images:
        raw = SampleSet(e.image_id, e.width, e.height,
                        tuple(tuple(s) for s in buckets[e.image_id]), e.regime)
        try:
            sample_sets.append(validate_sample_set(raw))
        except MalformedInput as exc:
            raise MalformedInput(f"{source}: {exc}") from None
    return sample_sets, manifest


def load_corpus(path: str | Path) -> tuple[list[SampleSet], CorpusManifest]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise MalformedInput(f"{path}: cannot read ({exc})") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedInput(f"{path}: not UTF-8 ({exc})") from None
    return loads_corpus(text, str(path))


def dumps_ground_truth(gts: Iterable[GroundTruthObject]) -> str:
    lines = []
    for gt in gts:
        b = gt.box
        lines.append(_dumps({
            "image_id": gt.image_id, "class_index": gt.class_label,
            "x1": _coord(b.x1), "y1": _coord(b.y1), "x2": _coord(b.x2), "y2": _coord(b.y2),
        }))
    return "".join(ln + "\n" for ln in lines)


def write_ground_truth(path: str | Path, gts: Iterable[GroundTruthObject]) -> None:
    Path(path).write_text(dumps_ground_truth(gts), encoding="utf-8")


def loads_ground_truth(text: str, manifest: Optional[CorpusManifest] = None,
                       source: str = "<ground truth>") -> list[GroundTruthObject]:
    """Parse ground truth; with a manifest, class indices and open-set images are checked."""
    try:
        return _loads_ground_truth(text, manifest, source)
    except (OverflowError, TypeError) as exc:
        raise MalformedInput(f"{source}: {exc}") from None


def _loads_ground_truth(text, manifest, source):
    regimes = manifest.regimes() if manifest is not None else None
    out = []
    for i, line in enumerate(_records(text)):
        if not line.strip():
            continue
        where = f"{source}:{i + 1}"
        rec = _parse_line(line, where)
        image_id = rec.get("image_id")
        if not isinstance(image_id, str):
            raise MalformedInput(f"{where}: 'image_id' must be a string")
        label = _integer(rec, "class_index", where)
        if label < 0 or (manifest is not None and label >= manifest.m):
            raise MalformedInput(f"{where}: class_index {label} outside [0, m)")
        box = BoundingBox(*(_number(rec, k, where) for k in ("x1", "y1", "x2", "y2")))
        if not box.is_valid():
            raise MalformedInput(f"{where}: degenerate ground-truth box")
        if regimes is not None:
            if image_id not in regimes:
                raise MalformedInput(f"{where}: unknown image_id {image_id!r}")
            if regimes[image_id].is_open_set:
                raise MalformedInput(f"{where}: open-set image {image_id!r} lists a known-class object")
        out.append(GroundTruthObject(box, label, image_id))
    return out


def load_ground_truth(path: str | Path, manifest: Optional[CorpusManifest] = None) -> list[GroundTruthObject]:
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except OSError as exc:
        raise MalformedInput(f"{path}: cannot read ({exc})") from None
    except UnicodeDecodeError as exc:
        raise MalformedInput(f"{path}: not UTF-8 ({exc})") from None
    return loads_ground_truth(text, manifest, str(path))


def _cell(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.6f}"
    return str(value)


def _row_key(row: Mapping) -> tuple:
    return tuple(_cell(row.get(k, "")) for k in _KEY_COLUMNS)


def dumps_report(rows: Iterable[Mapping]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in sorted(rows, key=_row_key):
        writer.writerow([_cell(row.get(k, "")) for k in REPORT_COLUMNS])
    return buf.getvalue()


def write_report(rows: Iterable[Mapping], path: str | Path) -> None:
    path = Path(path)
    text = dumps_report(rows)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


_INT_COLUMNS = {"n_correct", "n_closed_err", "n_open_err"}
_FLOAT_COLUMNS = {"map", "ue_min", "delta_star", "auroc", "aupr_in", "aupr_out"}


def read_report(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            row: dict = dict(raw)
            for k in _FLOAT_COLUMNS:
                row[k] = float(row[k])
            for k in _INT_COLUMNS:
                row[k] = int(row[k])
            rows.append(row)
    return rows
