"""Seeded generator of synthetic MC-Dropout-like detection corpora.

Each scene lists objects with a detection probability, Gaussian box jitter and
a Dirichlet concentration that controls how peaked their softmax scores are.
An object draws one score prototype per class it can peak on; every sample
then perturbs the prototype's logits, so samples of one object stay correlated
the way stochastic passes through a single network do.
Randomness comes from numpy's PCG64 bit generator, seeded per scene with
``SeedSequence([seed, scene_index, stream])`` so a corpus is reproducible
and scenes are independent of generation order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import MalformedInput, OverlapAmbiguity
from .io import CorpusManifest, manifest_for
from .metrics import GroundTruthObject
from .model import BoundingBox, Detection, Regime, SampleSet

SCORE_BASE_ALPHA = 0.1
CLUTTER_ALPHA = 2.0
FOREGROUND_MASS = (0.85, 1.0)
COORD_DIGITS = 4

VOC_CLASSES = (
    "aeroplane", "bicycle", "bird", "boat", "bottle", "bus", "car", "cat", "chair", "cow",
    "diningtable", "dog", "horse", "motorbike", "person", "pottedplant", "sheep", "sofa",
    "train", "tvmonitor",
)


@dataclass(frozen=True)
class KnownObject:
    box: BoundingBox
    class_label: int
    p_det: float = 1.0
    sigma: float = 2.0
    kappa: float = 20.0
    # Per-detection probability of peaking on another known class instead.
    confusion: dict[int, float] = field(default_factory=dict)
    # Systematic localization error added to every detection box.
    offset: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    # Logit noise between samples.
    tau: float = 0.25


@dataclass(frozen=True)
class UnknownObject:
    box: BoundingBox
    confusion: dict[int, float]
    p_det: float = 0.8
    sigma: float = 4.0
    kappa: float = 6.0
    tau: float = 0.5


@dataclass(frozen=True)
class SceneSpec:
    image_id: str
    width: float
    height: float
    regime: Regime = Regime.CLOSED
    known: tuple[KnownObject, ...] = ()
    unknown: tuple[UnknownObject, ...] = ()
    clutter_rate: float = 0.0

    def __post_init__(self):
        if self.regime is Regime.CLOSED and self.unknown:
            raise MalformedInput(f"{self.image_id}: closed-set scene with unknown objects")
        if self.regime.is_open_set and self.known:
            raise MalformedInput(f"{self.image_id}: open-set scene with known objects")
        if self.clutter_rate < 0:
            raise MalformedInput(f"{self.image_id}: negative clutter rate")


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    n_samples: int = 20
    scenes_per_regime: int = 10
    classes: tuple[str, ...] = VOC_CLASSES

    def __post_init__(self):
        if self.n_samples < 1:
            raise MalformedInput("n_samples must be >= 1")

    @property
    def m(self) -> int:
        return len(self.classes)


@dataclass
class GeneratedCorpus:
    sample_sets: list[SampleSet]
    ground_truth: list[GroundTruthObject]
    manifest: CorpusManifest
    # sources[image_id][sample][k]: "known:i", "unknown:i" or "clutter" for each detection
    sources: dict[str, list[list[str]]]


def _rng(seed: int, scene_index: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, scene_index, stream])))


PROTOTYPE_FLOOR = 1e-12


def _with_mass(rng: np.random.Generator, p: np.ndarray) -> tuple[float, ...]:
    mass = rng.uniform(*FOREGROUND_MASS)
    return tuple(float(v) for v in p * mass)


def _clutter_scores(rng: np.random.Generator, m: int) -> tuple[float, ...]:
    return _with_mass(rng, rng.dirichlet(np.full(m, CLUTTER_ALPHA)))


def _prototypes(rng: np.random.Generator, m: int, targets, kappa: float) -> dict[int, np.ndarray]:
    out = {}
    for t in sorted(set(targets)):
        alpha = np.full(m, SCORE_BASE_ALPHA)
        alpha[t] += kappa
        out[t] = np.log(np.maximum(rng.dirichlet(alpha), PROTOTYPE_FLOOR))
    return out


def _perturbed(rng: np.random.Generator, log_proto: np.ndarray, tau: float) -> tuple[float, ...]:
    z = log_proto + rng.normal(0.0, tau, log_proto.shape) if tau > 0 else log_proto
    p = np.exp(z - z.max())
    return _with_mass(rng, p / p.sum())


def _pick(rng: np.random.Generator, profile: dict[int, float]) -> int:
    keys = sorted(profile)
    w = np.array([profile[k] for k in keys], dtype=float)
    return int(keys[rng.choice(len(keys), p=w / w.sum())])


def _jitter(rng, box: BoundingBox, sigma: float, offset, width: float, height: float) -> Optional[BoundingBox]:
    noise = rng.normal(0.0, sigma, 4) if sigma > 0 else np.zeros(4)
    coords = np.array(box.as_tuple()) + np.asarray(offset, dtype=float) + noise
    b = BoundingBox(*(round(float(c), COORD_DIGITS) for c in coords)).clamp(width, height)
    return b if b.is_valid() else None


def generate_scene(spec: SceneSpec, config: GenConfig, scene_index: int):
    """Detections and provenance tags for one scene."""
    rng = _rng(config.seed, scene_index, 1)
    proto_rng = _rng(config.seed, scene_index, 2)
    m = config.m
    known_protos = [_prototypes(proto_rng, m, [o.class_label, *o.confusion], o.kappa) for o in spec.known]
    unknown_protos = [_prototypes(proto_rng, m, o.confusion, o.kappa) for o in spec.unknown]
    samples, tags = [], []
    for j in range(config.n_samples):
        dets: list[Detection] = []
        src: list[str] = []
        for i, obj in enumerate(spec.known):
            if rng.random() >= obj.p_det:
                continue
            target = obj.class_label
            swap = sum(obj.confusion.values())
            if swap > 0 and rng.random() < swap:
                target = _pick(rng, obj.confusion)
            box = _jitter(rng, obj.box, obj.sigma, obj.offset, spec.width, spec.height)
            scores = _perturbed(rng, known_protos[i][target], obj.tau)
            if box is not None:
                dets.append(Detection(box, scores, j))
                src.append(f"known:{i}")
        for i, obj in enumerate(spec.unknown):
            if rng.random() >= obj.p_det:
                continue
            target = _pick(rng, obj.confusion)
            box = _jitter(rng, obj.box, obj.sigma, (0, 0, 0, 0), spec.width, spec.height)
            scores = _perturbed(rng, unknown_protos[i][target], obj.tau)
            if box is not None:
                dets.append(Detection(box, scores, j))
                src.append(f"unknown:{i}")
        for _ in range(int(rng.poisson(spec.clutter_rate))):
            w = rng.uniform(0.05, 0.5) * spec.width
            h = rng.uniform(0.05, 0.5) * spec.height
            x1 = rng.uniform(0, spec.width - w)
            y1 = rng.uniform(0, spec.height - h)
            box = BoundingBox(*(round(float(c), COORD_DIGITS) for c in (x1, y1, x1 + w, y1 + h)))
            box = box.clamp(spec.width, spec.height)
            scores = _clutter_scores(rng, m)
            if box.is_valid():
                dets.append(Detection(box, scores, j))
                src.append("clutter")
        samples.append(tuple(dets))
        tags.append(src)
    sample_set = SampleSet(spec.image_id, float(spec.width), float(spec.height), tuple(samples), spec.regime)
    gts = [GroundTruthObject(o.box, o.class_label, spec.image_id) for o in spec.known]
    return sample_set, gts, tags


def generate_corpus(specs: Sequence[SceneSpec], config: GenConfig, name: str = "synthetic") -> GeneratedCorpus:
    sample_sets, gts, sources = [], [], {}
    seen = set()
    for idx, spec in enumerate(specs):
        if spec.image_id in seen:
            raise MalformedInput(f"duplicate image_id {spec.image_id!r}")
        seen.add(spec.image_id)
        s, g, tags = generate_scene(spec, config, idx)
        sample_sets.append(s)
        gts.extend(g)
        sources[spec.image_id] = tags
    return GeneratedCorpus(sample_sets, gts, manifest_for(name, config.classes, sample_sets), sources)


def _diag(box: BoundingBox) -> float:
    return math.hypot(box.width, box.height)


def expected_cluster_count(spec: SceneSpec, config: GenConfig) -> int:
    """Objects expected to yield at least two detections; needs well-separated objects.

    Clutter is not counted.
    """
    objs = [(o.box, o.sigma, o.p_det) for o in spec.known] + [(o.box, o.sigma, o.p_det) for o in spec.unknown]
    for a in range(len(objs)):
        for b in range(a + 1, len(objs)):
            (ba, sa, _), (bb, sb, _) = objs[a], objs[b]
            (xa, ya), (xb, yb) = ba.center, bb.center
            need = 4.0 * max(sa, sb) + (_diag(ba) + _diag(bb)) / 2.0
            if math.hypot(xa - xb, ya - yb) <= need:
                raise OverlapAmbiguity(f"{spec.image_id}: objects {a} and {b} are not separated")
    return sum(1 for _, _, p in objs if p * config.n_samples >= 2)


# ---------------------------------------------------------------------------
# Scene samplers ("profiles")

IMAGE_SIZE = (500.0, 375.0)


def _random_box(rng, width, height, lo=40.0, hi=200.0) -> BoundingBox:
    w = rng.uniform(lo, min(hi, width * 0.8))
    h = rng.uniform(lo, min(hi, height * 0.8))
    x1 = rng.uniform(0, width - w)
    y1 = rng.uniform(0, height - h)
    return BoundingBox(*(round(float(c), 2) for c in (x1, y1, x1 + w, y1 + h)))


def _place(rng, width, height, count, min_gap_iou=0.0, **box_kw) -> list[BoundingBox]:
    from .affinity import iou

    boxes: list[BoundingBox] = []
    for _ in range(200):
        if len(boxes) == count:
            break
        b = _random_box(rng, width, height, **box_kw)
        if all(iou(b, o) <= min_gap_iou for o in boxes):
            boxes.append(b)
    return boxes


def _size(box: BoundingBox) -> float:
    return math.sqrt(box.width * box.height)


def _closed_scene(rng, image_id, m) -> SceneSpec:
    width, height = IMAGE_SIZE
    objs = []
    for box in _place(rng, width, height, int(rng.integers(1, 5)), min_gap_iou=0.1):
        label = int(rng.integers(m))
        confusion: dict[int, float] = {}
        offset = (0.0, 0.0, 0.0, 0.0)
        kappa = float(rng.uniform(8.0, 40.0))
        # Box jitter scales with object size.
        sigma = _size(box) * float(rng.uniform(0.002, 0.008))
        roll = rng.random()
        if roll < 0.2:
            # hard to classify: often peaks on a similar class
            other = int((label + 1 + rng.integers(m - 1)) % m)
            confusion = {other: float(rng.uniform(0.3, 0.6))}
            kappa = float(rng.uniform(3.0, 10.0))
        elif roll < 0.35:
            # poorly localized, and the samples disagree about where
            s = 0.6 * max(box.width, box.height)
            offset = tuple(float(v) for v in rng.uniform(-s, s, 2)) * 2
            sigma = _size(box) * float(rng.uniform(0.04, 0.08))
        objs.append(KnownObject(box, label, p_det=float(rng.uniform(0.6, 1.0)),
                                sigma=sigma, kappa=kappa, confusion=confusion, offset=offset))
    return SceneSpec(image_id, width, height, Regime.CLOSED, known=tuple(objs), clutter_rate=0.5)


def _near_scene(rng, image_id, m) -> SceneSpec:
    width, height = IMAGE_SIZE
    objs = []
    for box in _place(rng, width, height, int(rng.integers(1, 4)), min_gap_iou=0.1):
        a, b = (int(v) for v in rng.choice(m, 2, replace=False))
        # Resembles known class a, sometimes b.
        objs.append(UnknownObject(box, {a: 0.85, b: 0.15}, p_det=float(rng.uniform(0.4, 0.9)),
                                  sigma=_size(box) * float(rng.uniform(0.02, 0.05)),
                                  kappa=float(rng.uniform(6.0, 20.0))))
    return SceneSpec(image_id, width, height, Regime.NEAR, unknown=tuple(objs), clutter_rate=0.5)


def _distant_scene(rng, image_id, m) -> SceneSpec:
    width, height = IMAGE_SIZE
    objs = []
    for box in _place(rng, width, height, int(rng.integers(1, 4)), min_gap_iou=0.1):
        # One flat prototype; the logit noise alone makes the winning label wander.
        profile = {int(rng.integers(m)): 1.0}
        objs.append(UnknownObject(box, profile, p_det=float(rng.uniform(0.3, 0.8)),
                                  sigma=_size(box) * float(rng.uniform(0.02, 0.05)),
                                  kappa=float(rng.uniform(0.5, 2.0))))
    return SceneSpec(image_id, width, height, Regime.DISTANT, unknown=tuple(objs), clutter_rate=0.5)


def _overlap_scene(rng, image_id, m) -> SceneSpec:
    """Pairs of distinct-class objects sharing nearly the same box."""
    width, height = IMAGE_SIZE
    objs = []
    for box in _place(rng, width, height, int(rng.integers(1, 3)), min_gap_iou=0.0, lo=80.0):
        a, b = (int(v) for v in rng.choice(m, 2, replace=False))
        shifted = BoundingBox(box.x1 + 1.0, box.y1, box.x2 + 1.0, box.y2)
        for lab, bx in ((a, box), (b, shifted)):
            objs.append(KnownObject(bx, lab, p_det=float(rng.uniform(0.8, 1.0)), sigma=0.5,
                                    kappa=float(rng.uniform(20.0, 40.0))))
    return SceneSpec(image_id, width, height, Regime.CLOSED, known=tuple(objs), clutter_rate=0.5)


def _crowded_scene(rng, image_id, m) -> SceneSpec:
    """A row of heavily overlapping objects of one class."""
    width, height = IMAGE_SIZE
    label = int(rng.integers(m))
    count = int(rng.integers(2, 5))
    w = float(rng.uniform(60.0, 100.0))
    h = float(rng.uniform(100.0, 200.0))
    step = w * float(rng.uniform(0.1, 0.3))
    x0 = float(rng.uniform(0, width - w - step * count))
    y0 = float(rng.uniform(0, height - h))
    objs = []
    for k in range(count):
        box = BoundingBox(round(x0 + k * step, 2), round(y0, 2), round(x0 + k * step + w, 2), round(y0 + h, 2))
        confusion: dict[int, float] = {}
        kappa = float(rng.uniform(8.0, 30.0))
        if rng.random() < 0.3:
            other = int((label + 1 + rng.integers(m - 1)) % m)
            # Mild confusion: the averaged label stays correct, only the entropy rises.
            confusion = {other: float(rng.uniform(0.1, 0.3))}
            kappa = float(rng.uniform(3.0, 8.0))
        objs.append(KnownObject(box, label, p_det=float(rng.uniform(0.8, 1.0)),
                                sigma=float(rng.uniform(1.0, 3.0)), kappa=kappa, confusion=confusion))
    return SceneSpec(image_id, width, height, Regime.CLOSED, known=tuple(objs), clutter_rate=1.0)


def _separated_scene(rng, image_id, m) -> SceneSpec:
    """Well-separated, reliably detected objects (cluster-count oracle preconditions hold)."""
    width, height = 800.0, 600.0
    objs = []
    count = int(rng.integers(1, 5))
    for _ in range(500):
        if len(objs) == count:
            break
        box = _random_box(rng, width, height, lo=40.0, hi=120.0)
        cand = KnownObject(box, int(rng.integers(m)), p_det=float(rng.uniform(0.9, 1.0)),
                           sigma=float(rng.uniform(0.5, 2.0)), kappa=float(rng.uniform(10.0, 40.0)))
        trial = SceneSpec(image_id, width, height, Regime.CLOSED, known=tuple(objs) + (cand,))
        try:
            expected_cluster_count(trial, GenConfig())
        except OverlapAmbiguity:
            continue
        objs.append(cand)
    return SceneSpec(image_id, width, height, Regime.CLOSED, known=tuple(objs))


ProfileFn = Callable[[np.random.Generator, str, int], SceneSpec]

# profile name -> list of (regime-tag prefix, scene sampler, share of scenes)
PROFILES: dict[str, tuple[tuple[str, ProfileFn, int], ...]] = {
    "default": (("closed", _closed_scene, 2), ("near", _near_scene, 1), ("distant", _distant_scene, 1)),
    "closed": (("closed", _closed_scene, 1),),
    "overlap": (("overlap", _overlap_scene, 2), ("near", _near_scene, 1), ("distant", _distant_scene, 1)),
    "crowded": (("crowded", _crowded_scene, 1),),
    "separated": (("separated", _separated_scene, 1),),
}


def sample_scenes(profile: str, config: GenConfig, n_images: Optional[int] = None) -> list[SceneSpec]:
    """Draw scene specs from a named profile.

    Without ``n_images`` each part of the profile gets ``share * scenes_per_regime`` scenes.
    """
    try:
        parts = PROFILES[profile]
    except KeyError:
        raise MalformedInput(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}") from None
    total_share = sum(share for _, _, share in parts)
    if n_images is None:
        counts = [share * config.scenes_per_regime for _, _, share in parts]
    else:
        counts = [n_images * share // total_share for _, _, share in parts]
        counts[0] += n_images - sum(counts)
    specs = []
    index = 0
    for (prefix, fn, _), count in zip(parts, counts):
        for k in range(count):
            rng = _rng(config.seed, index, 0)
            specs.append(fn(rng, f"{prefix}-{k:04d}", config.m))
            index += 1
    return specs


# ---------------------------------------------------------------------------
# Scene spec files

def _box_from(value, where) -> BoundingBox:
    if not isinstance(value, list) or len(value) != 4:
        raise MalformedInput(f"{where}: 'box' must be [x1, y1, x2, y2]")
    box = BoundingBox(*(float(v) for v in value))
    if not box.is_valid():
        raise MalformedInput(f"{where}: degenerate box")
    return box


def _profile_from(value, m, where) -> dict[int, float]:
    if not isinstance(value, dict):
        raise MalformedInput(f"{where}: 'confusion' must map class index to weight")
    out = {int(k): float(v) for k, v in value.items()}
    if any(k < 0 or k >= m for k in out) or any(v < 0 for v in out.values()):
        raise MalformedInput(f"{where}: bad confusion profile")
    return out


def load_scene_specs(path: str | Path) -> tuple[list[SceneSpec], tuple[str, ...]]:
    """Read a JSON scene file.

    Schema::

        {"classes": ["a", "b", ...],
         "scenes": [{"image_id": "s0", "width": 500, "height": 375, "regime": "closed",
                     "clutter_rate": 0.5,
                     "known": [{"box": [x1, y1, x2, y2], "class": 3, "p_det": 0.9,
                                "sigma": 2.0, "kappa": 20.0, "confusion": {"5": 0.3},
                                "offset": [0, 0, 0, 0], "tau": 0.25}],
                     "unknown": [{"box": [...], "confusion": {"2": 0.7, "5": 0.3},
                                  "p_det": 0.8, "sigma": 4.0, "kappa": 6.0, "tau": 0.5}]}]}
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise MalformedInput(f"{path}: {exc}") from None
    classes = tuple(doc.get("classes", VOC_CLASSES))
    m = len(classes)
    specs = []
    try:
        for i, sc in enumerate(doc["scenes"]):
            where = f"{path}: scenes[{i}]"
            known = tuple(
                KnownObject(_box_from(o["box"], where), int(o["class"]), float(o.get("p_det", 1.0)),
                            float(o.get("sigma", 2.0)), float(o.get("kappa", 20.0)),
                            _profile_from(o.get("confusion", {}), m, where),
                            tuple(float(v) for v in o.get("offset", (0, 0, 0, 0))),
                            float(o.get("tau", 0.25)))
                for o in sc.get("known", [])
            )
            if any(not 0 <= o.class_label < m for o in known):
                raise MalformedInput(f"{where}: class index outside [0, {m})")
            unknown = tuple(
                UnknownObject(_box_from(o["box"], where), _profile_from(o["confusion"], m, where),
                              float(o.get("p_det", 0.8)), float(o.get("sigma", 4.0)),
                              float(o.get("kappa", 6.0)), float(o.get("tau", 0.5)))
                for o in sc.get("unknown", [])
            )
            specs.append(SceneSpec(str(sc["image_id"]), float(sc["width"]), float(sc["height"]),
                                   Regime.parse(sc.get("regime", "closed")), known, unknown,
                                   float(sc.get("clutter_rate", 0.0))))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MalformedInput):
            raise
        raise MalformedInput(f"{path}: bad scene spec ({exc!r})") from None
    return specs, classes
