import json
import math

import numpy as np
import pytest

from detmerge import io as dio
from detmerge.errors import MalformedInput, OverlapAmbiguity
from detmerge.model import Regime, validate_sample_set
from detmerge.observation import entropy
from detmerge.synthgen import (PROFILES, GenConfig, KnownObject, SceneSpec, UnknownObject,
                               expected_cluster_count, generate_corpus, load_scene_specs, sample_scenes)
from support import box


def _scene(*objs, clutter=0.0, regime=Regime.CLOSED, image_id="s"):
    if regime is Regime.CLOSED:
        return SceneSpec(image_id, 500, 375, regime, known=tuple(objs), clutter_rate=clutter)
    return SceneSpec(image_id, 500, 375, regime, unknown=tuple(objs), clutter_rate=clutter)


def test_degenerate_noise_copies_box():
    obj = KnownObject(box(10, 20, 110, 220), 4, p_det=1.0, sigma=0.0, kappa=1e6, tau=0.0)
    corpus = generate_corpus([_scene(obj)], GenConfig(seed=1, n_samples=5))
    for sample in corpus.sample_sets[0].samples:
        (d,) = sample
        assert d.box == obj.box
        assert d.winning_label == 4
        assert d.winning_score / sum(d.scores) > 0.999


def test_seeded_determinism():
    cfg = GenConfig(seed=42)
    text = [dio.dumps_corpus(*(lambda c: (c.sample_sets, c.manifest))(generate_corpus(sample_scenes("default", cfg), cfg)))
            for _ in range(2)]
    assert text[0] == text[1]
    other = GenConfig(seed=43)
    c3 = generate_corpus(sample_scenes("default", other), other)
    assert dio.dumps_corpus(c3.sample_sets, c3.manifest) != text[0]


def test_clutter_count_poisson():
    cfg = GenConfig(seed=3, n_samples=100)
    corpus = generate_corpus([_scene(clutter=2.0)], cfg)
    count = sum(len(s) for s in corpus.sample_sets[0].samples)
    assert abs(count - 200) <= 3 * math.sqrt(200)


def test_expected_cluster_count_examples():
    cfg = GenConfig(n_samples=20)
    three = _scene(KnownObject(box(0, 0, 40, 40), 0), KnownObject(box(200, 0, 240, 40), 1),
                   KnownObject(box(0, 200, 40, 240), 2))
    assert expected_cluster_count(three, cfg) == 3
    rare = _scene(KnownObject(box(0, 0, 40, 40), 0, p_det=0.02))
    assert expected_cluster_count(rare, cfg) == 0
    close = _scene(KnownObject(box(0, 0, 40, 40), 0, sigma=5), KnownObject(box(1, 0, 41, 40), 1, sigma=5))
    with pytest.raises(OverlapAmbiguity):
        expected_cluster_count(close, cfg)


def test_scene_regime_invariants():
    with pytest.raises(MalformedInput):
        SceneSpec("x", 10, 10, Regime.CLOSED, unknown=(UnknownObject(box(0, 0, 5, 5), {0: 1.0}),))
    with pytest.raises(MalformedInput):
        SceneSpec("x", 10, 10, Regime.NEAR, known=(KnownObject(box(0, 0, 5, 5), 0),))
    with pytest.raises(MalformedInput):
        SceneSpec("x", 10, 10, clutter_rate=-1)
    with pytest.raises(MalformedInput):
        GenConfig(n_samples=0)


@pytest.mark.parametrize("profile", sorted(PROFILES))
def test_profiles_valid_and_open_set_has_no_gt(profile):
    cfg = GenConfig(seed=5)
    corpus = generate_corpus(sample_scenes(profile, cfg, 12), cfg)
    for s in corpus.sample_sets:
        assert validate_sample_set(s) == s
    open_ids = {s.image_id for s in corpus.sample_sets if s.regime.is_open_set}
    assert not any(g.image_id in open_ids for g in corpus.ground_truth)


def test_sample_scenes_counts():
    cfg = GenConfig(scenes_per_regime=3)
    regimes = [s.regime for s in sample_scenes("default", cfg)]
    assert regimes.count(Regime.CLOSED) == 6 and regimes.count(Regime.NEAR) == 3
    assert len(sample_scenes("default", cfg, 10)) == 10
    with pytest.raises(MalformedInput):
        sample_scenes("nope", cfg)


def test_higher_kappa_lower_entropy():
    cfg = GenConfig(seed=0, n_samples=200)
    means = []
    for kappa in (2.0, 8.0, 40.0):
        obj = KnownObject(box(50, 50, 150, 150), 3, kappa=kappa, tau=0.25)
        scenes = [_scene(obj, image_id=f"k{i}") for i in range(10)]
        corpus = generate_corpus(scenes, cfg)
        means.append(np.mean([entropy(d.scores) for s in corpus.sample_sets for d in s.detections()]))
    assert means[0] > means[1] > means[2]


def test_duplicate_image_ids():
    with pytest.raises(MalformedInput):
        generate_corpus([_scene(), _scene()], GenConfig())


def test_load_scene_specs(tmp_path):
    doc = {"classes": ["a", "b", "c"], "scenes": [
        {"image_id": "s0", "width": 100, "height": 80, "clutter_rate": 0.5,
         "known": [{"box": [1, 2, 30, 40], "class": 2, "confusion": {"0": 0.2}, "tau": 0.1}]},
        {"image_id": "s1", "width": 100, "height": 80, "regime": "near",
         "unknown": [{"box": [1, 2, 30, 40], "confusion": {"0": 0.7, "1": 0.3}}]},
    ]}
    path = tmp_path / "scenes.json"
    path.write_text(json.dumps(doc))
    specs, classes = load_scene_specs(path)
    assert classes == ("a", "b", "c")
    assert specs[0].known[0].confusion == {0: 0.2} and specs[0].known[0].tau == 0.1
    assert specs[1].unknown[0].tau == 0.5
    doc["scenes"][0]["known"][0]["class"] = 3
    path.write_text(json.dumps(doc))
    with pytest.raises(MalformedInput):
        load_scene_specs(path)
    path.write_text("{")
    with pytest.raises(MalformedInput):
        load_scene_specs(path)
