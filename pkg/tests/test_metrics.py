import math

import numpy as np
import pytest

from detmerge.errors import EmptyClass
from detmerge.metrics import (Correctness, GroundTruthObject, aupr, auroc, average_precision, gt_iou,
                              label_correctness, mean_average_precision, min_uncertainty_error,
                              uncertainty_error)
from detmerge.model import Observation, Regime
from support import ap_envelope, aupr_enumerate, auroc_pairs, box, min_ue_enumerate, ue_loop

SEP = ([0.1, 0.2], [0.8, 0.9])


def obs(coords, label=0, score=0.9, image_id="im", m=3):
    scores = [0.01] * m
    scores[label] = score
    return Observation(box(*coords), tuple(scores), 2, 0.1, 0.0, label, score, image_id)


def gt(coords, label=0, image_id="im"):
    return GroundTruthObject(box(*coords), label, image_id)


def test_label_correctness_examples():
    o = obs((0, 0, 10, 10))
    shifted = (0, 0, 10, 6)  # IoU 0.6
    (r,) = label_correctness([o], [gt(shifted)], Regime.CLOSED)
    assert r.correctness is Correctness.CORRECT and r.gt_iou == pytest.approx(0.6)
    (r,) = label_correctness([o], [gt(shifted, label=1)], Regime.CLOSED)
    assert r.correctness is Correctness.CLOSED_SET_ERROR and r.gt_iou == 0.0
    (r,) = label_correctness([o], [], "distant")
    assert r.correctness is Correctness.OPEN_SET_ERROR
    (r,) = label_correctness([o], [], "near", uncertainties=[0.7])
    assert r.uncertainty == 0.7


def test_gt_iou_examples():
    o = obs((0, 0, 10, 10))
    assert gt_iou(o, [gt((0, 0, 10, 10))]) == 1.0
    assert gt_iou(o, [gt((0, 0, 10, 10), label=2)]) == 0.0
    assert gt_iou(o, [gt((0, 0, 10, 3)), gt((0, 0, 10, 7))]) == pytest.approx(0.7)


def test_ue_examples():
    assert uncertainty_error(SEP, 0.5) == 0.0
    assert uncertainty_error(SEP, 0.15) == 0.25
    assert uncertainty_error(SEP, 0.0) == 0.5


def test_min_ue_examples():
    assert min_uncertainty_error(SEP) == (0.0, 0.2)
    assert min_uncertainty_error(([0.3, 0.5], [0.3, 0.5]))[0] == 0.5


def test_min_ue_against_dense_sweep():
    rng = np.random.default_rng(0)
    c, i = rng.random(40).round(3).tolist(), (rng.random(30) * 0.8 + 0.2).round(3).tolist()
    sweep = min(ue_loop(c, i, t) for t in np.linspace(-0.01, 1.01, 10_001))
    assert min_uncertainty_error((c, i))[0] == pytest.approx(sweep, abs=1e-9)


def test_min_ue_smallest_delta_on_ties():
    ue, delta = min_uncertainty_error(([0.1], [0.5, 0.9]))
    assert (ue, delta) == (0.0, 0.1)


def test_auroc_examples():
    assert auroc(SEP) == 1.0
    assert auroc(([0.4] * 3, [0.4] * 5)) == 0.5
    assert auroc(([0.1, 0.9], [0.5])) == 0.5


def test_aupr_examples():
    assert aupr(SEP, "in") == 1.0
    assert aupr(SEP, "out") == 1.0
    assert aupr(([0.1, 0.4], []), "in") == 1.0
    with pytest.raises(EmptyClass):
        aupr(([0.1, 0.4], []), "out")


def test_metric_oracles_random():
    rng = np.random.default_rng(7)
    for _ in range(30):
        c = rng.integers(0, 20, rng.integers(1, 40)).tolist()
        i = rng.integers(5, 25, rng.integers(1, 40)).tolist()
        assert auroc((c, i)) == pytest.approx(auroc_pairs(c, i), abs=1e-12)
        assert min_uncertainty_error((c, i))[0] == pytest.approx(min_ue_enumerate(c, i), abs=1e-12)
        assert aupr((c, i), "in") == pytest.approx(aupr_enumerate(c, i), abs=1e-12)
        neg_i, neg_c = [-v for v in i], [-v for v in c]
        assert aupr((c, i), "out") == pytest.approx(aupr_enumerate(neg_i, neg_c), abs=1e-12)


def test_empty_class_errors():
    for fn in (lambda r: uncertainty_error(r, 0.1), min_uncertainty_error, auroc):
        with pytest.raises(EmptyClass):
            fn(([], [0.1]))
        with pytest.raises(EmptyClass):
            fn(([0.1], []))


def test_ap_single_detection():
    assert average_precision([obs((0, 0, 10, 6))], [gt((0, 0, 10, 10))], 0) == 1.0


def test_ap_duplicate_is_fp_but_envelope_keeps_one():
    dets = [obs((0, 0, 10, 6), score=0.9), obs((0, 4, 10, 10), score=0.8)]
    assert average_precision(dets, [gt((0, 0, 10, 10))], 0) == 1.0


def test_ap_no_detections():
    assert average_precision([], [gt((0, 0, 10, 10))], 0) == 0.0
    assert average_precision([obs((0, 0, 10, 10), label=1)], [gt((0, 0, 10, 10))], 0) == 0.0


def test_ap_matches_envelope_oracle():
    gts = [gt((0, 0, 10, 10)), gt((20, 0, 30, 10)), gt((0, 0, 10, 10), image_id="b")]
    dets = [obs((0, 0, 10, 10), score=0.95), obs((50, 50, 60, 60), score=0.9),
            obs((20, 0, 30, 9), score=0.8), obs((0, 0, 10, 9), score=0.7),
            obs((0, 0, 10, 10), score=0.6, image_id="b")]
    flags = [1, 0, 1, 0, 1]
    assert average_precision(dets, gts, 0) == pytest.approx(ap_envelope(flags, 3), abs=1e-12)


def test_map_mean_over_gt_classes():
    gts = [gt((0, 0, 10, 10), 0), gt((0, 0, 10, 10), 2)]
    dets = [obs((0, 0, 10, 10), 0)]
    assert mean_average_precision(dets, gts) == 0.5
    assert math.isnan(mean_average_precision(dets, []))


def test_auroc_random_uncertainty_near_half():
    rng = np.random.default_rng(2024)
    u = rng.random(10_000)
    correct = rng.random(10_000) < 0.5
    assert abs(auroc((u[correct], u[~correct])) - 0.5) <= 0.05
