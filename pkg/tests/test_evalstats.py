import numpy as np
import pytest

from bowelsound.classify import ClassProbabilities
from bowelsound.evalstats import (
    EvalError,
    adjustment_report,
    agreement,
    auroc,
    distribution,
    distribution_csv,
    duration_histogram_csv,
    interval_iou,
    match_events,
    report_json,
)
from bowelsound.labels import EVENT_LABELS, LabelTrack, PatternLabel, Segment

SB, MB, CRS, HS, NONE = (
    PatternLabel.SB,
    PatternLabel.MB,
    PatternLabel.CRS,
    PatternLabel.HS,
    PatternLabel.NONE,
)


def _track(*spans):
    return LabelTrack(tuple(Segment(a, b, label) for a, b, label in spans))


def _probs(**kv):
    base = {l: 0.0 for l in EVENT_LABELS}
    for k, v in kv.items():
        base[PatternLabel.parse(k)] = v
    total = sum(base.values())
    return ClassProbabilities({l: p / total for l, p in base.items()})


# --- distribution ----------------------------------------------------------

def test_distribution_healthy_cohort_proportions():
    spans = []
    t = 0.0
    for label, count in ((NONE, 490), (SB, 430), (MB, 50), (CRS, 29), (HS, 1)):
        for _ in range(count):
            spans.append((t, t + 0.1, label))
            t += 0.2
    report = distribution(_track(*spans), group="Original")
    assert report.total_segments == 1000
    assert report.per_label[NONE].normalized_count == pytest.approx(0.49, abs=1e-9)
    assert report.per_label[SB].normalized_count == pytest.approx(0.43, abs=1e-9)
    assert report.per_label[MB].normalized_count == pytest.approx(0.05, abs=1e-9)
    assert report.per_label[CRS].normalized_count == pytest.approx(0.029, abs=1e-9)
    total = sum(st.normalized_count for st in report.per_label.values())
    assert total == pytest.approx(1.0, abs=1e-9)


def test_distribution_single_segment():
    report = distribution(_track((0.0, 1.0, CRS)))
    assert report.per_label[CRS].normalized_count == 1.0


def test_distribution_duration_stats_uniform():
    spans = [(i * 0.2, i * 0.2 + 0.1, SB) for i in range(10)]
    report = distribution(_track(*spans))
    st = report.per_label[SB]
    assert st.mean_s == st.median_s == st.max_s == pytest.approx(0.1)


def test_distribution_empty_track_flagged():
    report = distribution(LabelTrack())
    assert report.empty and report.total_segments == 0
    assert all(st.count == 0 for st in report.per_label.values())


def test_adding_segment_increases_normalized_count():
    base = _track((0.0, 0.1, SB), (0.2, 0.3, MB))
    more = _track((0.0, 0.1, SB), (0.2, 0.3, MB), (0.4, 0.5, MB))
    assert (
        distribution(more).per_label[MB].normalized_count
        > distribution(base).per_label[MB].normalized_count
    )


# --- agreement -------------------------------------------------------------

def test_agreement_identity():
    track = _track((0.0, 0.1, SB), (0.5, 0.8, MB), (1.0, 2.0, CRS))
    report = agreement(track, track)
    assert report.missed == 0 and report.spurious == 0
    assert report.matched_events == 3
    assert report.boundary_mae_ms == 0.0
    for r in EVENT_LABELS:
        for c in EVENT_LABELS:
            expected = {SB: 1, MB: 1, CRS: 1}.get(r, 0) if r is c else 0
            assert report.confusion[r][c] == expected
    assert report.prevalence_order_preserved


def test_agreement_shifted_candidate():
    ref = _track((1.0, 1.06, SB), (2.0, 2.5, MB))
    cand = _track((1.01, 1.07, SB), (2.01, 2.51, MB))
    report = agreement(ref, cand)
    assert report.matched_events == 2
    assert report.boundary_mae_ms == pytest.approx(10.0, abs=1e-6)


def test_agreement_empty_candidate():
    ref = _track((0.0, 0.1, SB), (0.5, 0.8, MB))
    report = agreement(ref, LabelTrack())
    assert report.matched_events == 0
    assert report.missed == 2 and report.spurious == 0


def test_agreement_counts_are_symmetric():
    a = _track((0.0, 0.1, SB), (0.5, 0.8, MB), (1.0, 1.4, CRS))
    b = _track((0.0, 0.1, SB), (2.0, 2.2, MB))
    fwd = agreement(a, b)
    rev = agreement(b, a)
    assert fwd.missed == rev.spurious
    assert fwd.spurious == rev.missed
    assert fwd.matched_events == rev.matched_events


def test_agreement_excludes_none_segments():
    ref = _track((0.0, 1.0, NONE), (1.0, 1.1, SB))
    cand = _track((0.0, 0.9, NONE), (1.0, 1.1, SB))
    report = agreement(ref, cand)
    assert report.matched_events == 1
    assert report.missed == 0 and report.spurious == 0


def test_agreement_span_mismatch():
    ref = _track((0.0, 0.1, SB), (9.9, 10.0, SB))
    cand = _track((0.0, 0.1, SB), (29.9, 30.0, SB))
    with pytest.raises(EvalError, match="span"):
        agreement(ref, cand)


def test_match_events_greedy_by_iou():
    ref = [Segment(0.0, 1.0, SB)]
    cand = [Segment(0.0, 0.9, SB), Segment(0.05, 1.0, SB)]
    matches = match_events(ref, cand)
    assert len(matches) == 1
    assert matches[0][1] == 1  # 0.95/1.0 beats 0.9/1.0


def test_interval_iou_basics():
    assert interval_iou((0.0, 1.0), (0.0, 1.0)) == 1.0
    assert interval_iou((0.0, 1.0), (2.0, 3.0)) == 0.0
    assert interval_iou((0.0, 1.0), (0.5, 1.5)) == pytest.approx(1.0 / 3.0)


# --- AUROC -----------------------------------------------------------------

def _brute_force_auroc(scores, positives):
    pos = [s for s, p in zip(scores, positives) if p]
    neg = [s for s, p in zip(scores, positives) if not p]
    total = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                total += 1.0
            elif a == b:
                total += 0.5
    return total / (len(pos) * len(neg))


def test_auroc_perfect_separation():
    labels = [SB] * 5 + [MB] * 5
    scores = [_probs(SB=0.9, MB=0.1)] * 5 + [_probs(SB=0.1, MB=0.9)] * 5
    report = auroc(labels, scores)
    assert report.per_class[SB] == 1.0
    assert report.per_class[MB] == 1.0


def test_auroc_all_ties_is_half():
    labels = [SB] * 4 + [MB] * 4
    scores = [_probs(SB=1, MB=1, CRS=1, HS=1)] * 8
    report = auroc(labels, scores)
    assert report.per_class[SB] == 0.5
    assert report.per_class[MB] == 0.5


def test_auroc_matches_brute_force_exactly():
    rng = np.random.default_rng(17)
    for _ in range(50):
        n = int(rng.integers(4, 200))
        labels = [EVENT_LABELS[i] for i in rng.integers(0, 4, size=n)]
        # coarse grid of scores forces plenty of ties
        raw = rng.integers(0, 5, size=(n, 4)).astype(float) + 1.0
        raw /= raw.sum(axis=1, keepdims=True)
        scores = [
            ClassProbabilities(dict(zip(EVENT_LABELS, row))) for row in raw
        ]
        report = auroc(labels, scores)
        for cls in EVENT_LABELS:
            positives = [lab is cls for lab in labels]
            if not any(positives) or all(positives):
                assert report.per_class[cls] is None
                continue
            expected = _brute_force_auroc([s.probs[cls] for s in scores], positives)
            assert report.per_class[cls] == expected  # bit-exact


def test_auroc_degenerate_single_class():
    labels = [SB] * 4
    scores = [_probs(SB=1.0, MB=1e-9)] * 4
    report = auroc(labels, scores)
    assert report.macro is None or report.per_class[SB] is None
    assert SB in report.skipped


# --- adjustment ------------------------------------------------------------

def test_adjustment_identity_zero_pct():
    track = _track((0.0, 0.084, SB), (0.5, 0.584, SB))
    report = adjustment_report(track, track)
    assert report.pct_removed_or_merged == 0.0
    row = report.per_label[SB]
    assert row.auto_count == row.expert_count == 2
    assert row.mean_dur_auto_s == row.mean_dur_expert_s


def test_adjustment_table_row_shape():
    auto_spans = [(i * 0.3, i * 0.3 + 0.084, SB) for i in range(400)]
    expert_spans = [(i * 0.3, i * 0.3 + 0.101, SB) for i in range(315)]
    auto = _track(*auto_spans)
    expert = _track(*expert_spans)
    report = adjustment_report(auto, expert, span_tolerance_s=100.0)
    row = report.per_label[SB]
    assert row.auto_count == 400
    assert row.expert_count == 315
    assert row.mean_dur_auto_s == pytest.approx(0.084, abs=1e-9)
    assert row.mean_dur_expert_s == pytest.approx(0.101, abs=1e-9)


def test_adjustment_merge_counts_once():
    auto = _track((0.0, 0.4, SB), (0.5, 0.9, SB))
    expert = _track((0.0, 0.9, SB))
    report = adjustment_report(auto, expert)
    # two autos absorbed by one expert segment = 1 merged event of 2 autos
    assert report.pct_removed_or_merged == pytest.approx(100.0 * 1 / 2)


def test_adjustment_removed_events():
    auto = _track((0.0, 0.1, SB), (5.0, 5.1, SB))
    expert = _track((0.0, 0.1, SB))
    report = adjustment_report(auto, expert, span_tolerance_s=10.0)
    assert report.pct_removed_or_merged == pytest.approx(50.0)


def test_adjustment_review_time_reduction():
    track = _track((0.0, 0.1, SB))
    report = adjustment_report(track, track, review_time_s=300.0, manual_baseline_s=1000.0)
    assert report.review_time_s == 300.0
    assert report.time_reduction_pct == pytest.approx(70.0)
    no_baseline = adjustment_report(track, track, review_time_s=300.0)
    assert no_baseline.time_reduction_pct is None


# --- serialization ---------------------------------------------------------

def test_report_serialization_shapes():
    track = _track((0.0, 0.1, SB), (0.5, 0.8, MB))
    dist = distribution(track, group="Auto")
    doc = report_json(dist)
    assert '"group": "Auto"' in doc
    csv_text = distribution_csv(dist)
    assert csv_text.splitlines()[0].startswith("group,label,count")
    assert len(csv_text.splitlines()) == 6  # header + 5 labels
    hist = duration_histogram_csv(track)
    assert hist.splitlines()[0] == "label,bin_lo_ms,bin_hi_ms,count"
