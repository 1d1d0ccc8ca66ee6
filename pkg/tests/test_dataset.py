import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affordance.clustering import build_vocabulary
from affordance.dataset import (
    read_dataset,
    synthesize_negatives,
    split_by_show,
    write_dataset,
)
from affordance.errors import (
    DatasetFormatError,
    EmptyInputError,
    InvalidSplitError,
    UndefinedPrecisionError,
)
from affordance.evaluate import EvalReport, calibrate_delta, pr_curve, topk_accuracies
from affordance.records import AffordanceRecord, adjusted_record, next_status
from affordance.errors import TransitionError
from affordance.synthetic import random_pose

SHOWS = ("himym", "tbbt", "friends", "taahm", "elr", "frasier", "seinfeld")


def make_record(rng, i, show=None, with_features=True):
    pose = random_pose(rng, span=200.0)
    return AffordanceRecord(
        record_id=f"rec-{i:04d}",
        scene_id=f"scene-{i % 17:02d}",
        show=show or SHOWS[i % len(SHOWS)],
        anchor=tuple(pose.bbox_center),
        pose=pose,
        image_ref=f"scenes/{i % 17:02d}.png" if i % 3 else None,
        class_id=int(rng.integers(0, 30)) if i % 4 else None,
        source=("global", "local", "manual")[i % 3],
        status=("hypothesis", "accepted", "rejected", "adjusted")[i % 4],
        label="negative" if i % 5 == 0 else "positive",
        out_of_frame=bool(i % 7 == 0),
        features=rng.normal(size=(3, 16)) if with_features and i % 2 else None,
    )


# -- serialization ----------------------------------------------------------------

def test_empty_dataset_roundtrip(tmp_path):
    path = tmp_path / "data.jsonl"
    write_dataset([], path, featurizer_seed=7)
    records, header = read_dataset(path)
    assert records == []
    assert header["featurizer_seed"] == 7
    assert path.read_text().count("\n") == 1  # header only


def test_roundtrip_1000_random_records_byte_identical(tmp_path):
    rng = np.random.default_rng(0)
    records = [make_record(rng, i) for i in range(1000)]
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    write_dataset(records, a, featurizer_seed=3)
    loaded, _ = read_dataset(a)
    write_dataset(loaded, b, featurizer_seed=3)
    assert a.read_bytes() == b.read_bytes()
    for orig, back in zip(records, loaded):
        assert orig.record_id == back.record_id
        assert np.array_equal(orig.pose.joints, back.pose.joints)
        assert orig.anchor == back.anchor
        assert orig.class_id == back.class_id
        if orig.features is None:
            assert back.features is None
        else:
            assert np.array_equal(orig.features, back.features)


def test_corrupted_line_cited_by_number(tmp_path):
    rng = np.random.default_rng(1)
    records = [make_record(rng, i) for i in range(30)]
    path = tmp_path / "data.jsonl"
    write_dataset(records, path)
    lines = path.read_text().splitlines()
    lines[16] = lines[16][:40] + "GARBAGE"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError) as exc:
        read_dataset(path)
    assert exc.value.line_no == 17
    assert "line 17" in str(exc.value)


def test_duplicate_ids_rejected(tmp_path):
    rng = np.random.default_rng(2)
    r = make_record(rng, 1)
    with pytest.raises(DatasetFormatError):
        write_dataset([r, r], tmp_path / "x.jsonl")


def test_bad_header_rejected(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text('{"format":"something-else","version":1}\n')
    with pytest.raises(DatasetFormatError) as exc:
        read_dataset(path)
    assert exc.value.line_no == 1


@given(st.integers(min_value=0, max_value=100_000))
@settings(max_examples=40, deadline=None)
def test_roundtrip_property(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    records = [make_record(rng, i) for i in range(int(rng.integers(1, 8)))]
    path = tmp_path_factory.mktemp("ds") / "d.jsonl"
    write_dataset(records, path)
    loaded, _ = read_dataset(path)
    assert len(loaded) == len(records)
    for orig, back in zip(records, loaded):
        assert np.array_equal(orig.pose.joints, back.pose.joints)
        assert orig.status == back.status
        assert orig.label == back.label


# -- status machine ----------------------------------------------------------------

def test_status_transitions():
    assert next_status("hypothesis", "accept") == "accepted"
    assert next_status("hypothesis", "reject") == "rejected"
    assert next_status("hypothesis", "adjust") == "accepted"
    assert next_status("accepted", "adjust") == "adjusted"
    assert next_status("adjusted", "adjust") == "adjusted"
    assert next_status("adjusted", "accept") == "accepted"
    for action in ("accept", "reject", "adjust"):
        with pytest.raises(TransitionError):
            next_status("rejected", action)
    with pytest.raises(TransitionError):
        next_status("accepted", "accept")


def test_adjusted_record_moves_anchor_and_drops_features():
    rng = np.random.default_rng(3)
    rec = make_record(rng, 2, with_features=True)
    rec.status = "accepted"
    new_joints = rec.pose.joints + np.array([10.0, 5.0])
    adj = adjusted_record(rec, new_joints)
    assert adj.status == "adjusted"
    np.testing.assert_allclose(adj.anchor, adj.pose.bbox_center)
    assert adj.features is None
    np.testing.assert_array_equal(adj.pose.joints, new_joints)


# -- splits -----------------------------------------------------------------------

def test_split_by_show_single_show():
    rng = np.random.default_rng(4)
    records = [make_record(rng, i, show="friends") for i in range(10)]
    train, test = split_by_show(records, "friends")
    assert train == []
    assert len(test) == 10


def test_split_by_show_partition():
    rng = np.random.default_rng(5)
    records = [make_record(rng, i) for i in range(70)]
    train, test = split_by_show(records, "friends")
    assert len(train) + len(test) == 70
    assert all(r.show != "friends" for r in train)
    assert all(r.show == "friends" for r in test)


def test_split_by_show_counts_preserved():
    rng = np.random.default_rng(6)
    counts = {"himym": 35, "tbbt": 39, "friends": 38, "taahm": 32,
              "elr": 52, "frasier": 60, "seinfeld": 30}
    records = []
    i = 0
    for show, n in counts.items():
        for _ in range(n):
            records.append(make_record(rng, i, show=show))
            i += 1
    train, test = split_by_show(records, "friends")
    assert len(test) == counts["friends"]
    assert len(train) == sum(counts.values()) - counts["friends"]


def test_split_by_show_unknown():
    rng = np.random.default_rng(7)
    records = [make_record(rng, i, show="friends") for i in range(3)]
    with pytest.raises(InvalidSplitError):
        split_by_show(records, "cheers")


# -- negatives ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_vocab():
    rng = np.random.default_rng(8)
    return build_vocabulary([random_pose(rng) for _ in range(8)], 3, seed=0)


def positives(rng, n):
    out = []
    for i in range(n):
        rec = make_record(rng, i)
        rec.label = "positive"
        rec.status = "accepted"
        out.append(rec)
    return out


def test_synthesize_negatives_zero_ratio(small_vocab):
    rng = np.random.default_rng(9)
    assert synthesize_negatives(positives(rng, 5), small_vocab, seed=0, per_positive=0) == []


def test_synthesize_negatives_differ_from_sources(small_vocab):
    rng = np.random.default_rng(10)
    pos = positives(rng, 20)
    negs = synthesize_negatives(pos, small_vocab, seed=1, per_positive=1.0)
    by_id = {r.record_id: r for r in pos}
    for neg in negs:
        src = by_id[neg.record_id.split("~")[0]]
        assert np.linalg.norm(neg.pose.joints - src.pose.joints) > 0.0
        assert neg.label == "negative"


def test_synthesize_negatives_ratio_exact(small_vocab):
    rng = np.random.default_rng(11)
    pos = positives(rng, 40)
    negs = synthesize_negatives(pos, small_vocab, seed=2, per_positive=2.47)
    assert len(negs) == round(2.47 * 40)


def test_synthesize_negatives_deterministic(small_vocab):
    rng = np.random.default_rng(12)
    pos = positives(rng, 10)
    a = synthesize_negatives(pos, small_vocab, seed=3, per_positive=2.0)
    b = synthesize_negatives(pos, small_vocab, seed=3, per_positive=2.0)
    for x, y in zip(a, b):
        assert x.record_id == y.record_id
        assert np.array_equal(x.pose.joints, y.pose.joints)


# -- top-k -------------------------------------------------------------------------

def test_topk_perfect_classifier():
    probs = np.eye(30)[list(range(10))]
    labels = list(range(10))
    accs = topk_accuracies(probs, labels, k_max=5)
    assert accs == [1.0] * 5


def test_topk_uniform_classifier_exact_k_over_30():
    # one record per class; uniform probabilities rank ids 0..29 by tie-break
    probs = np.full((30, 30), 1.0 / 30.0)
    labels = np.arange(30)
    accs = topk_accuracies(probs, labels, k_max=5)
    assert accs == [k / 30.0 for k in range(1, 6)]


def test_topk_monotone_and_count():
    rng = np.random.default_rng(13)
    probs = rng.dirichlet(np.ones(30), size=50)
    labels = rng.integers(0, 30, size=50)
    accs = topk_accuracies(probs, labels, k_max=5)
    assert len(accs) == 5
    assert all(b >= a for a, b in zip(accs, accs[1:]))


def test_topk_empty_input():
    with pytest.raises(EmptyInputError):
        topk_accuracies(np.zeros((0, 30)), [], k_max=5)


# -- PR curve ----------------------------------------------------------------------

def brute_force_pr(scores, labels):
    """Independent confusion-matrix recomputation at every distinct score."""
    points = []
    for t in sorted(set(scores)):
        tp = sum(1 for s, y in zip(scores, labels) if s <= t and y)
        fp = sum(1 for s, y in zip(scores, labels) if s <= t and not y)
        fn = sum(1 for s, y in zip(scores, labels) if s > t and y)
        points.append((tp / (tp + fp), tp / (tp + fn), t))
    ap = 0.0
    prev_r = 0.0
    for p, r, _ in points:
        ap += (r - prev_r) * p
        prev_r = r
    return points, ap


def test_pr_perfectly_separated():
    scores = np.array([0.1, 0.2, 0.3, 5.0, 6.0, 7.0])
    labels = np.array([True, True, True, False, False, False])
    _, ap = pr_curve(scores, labels)
    assert ap == pytest.approx(1.0)


def test_pr_constant_scores_equal_prevalence():
    # all scores tied: a single sweep point, precision = prevalence, recall 1
    scores = np.zeros(10)
    labels = np.array([True] * 3 + [False] * 7)
    points, ap = pr_curve(scores, labels)
    assert len(points) == 1
    assert ap == pytest.approx(0.3, abs=1e-9)


def test_pr_matches_brute_force():
    rng = np.random.default_rng(14)
    scores = rng.uniform(0, 1, size=60).round(2)  # rounding forces ties
    labels = rng.uniform(size=60) < 0.4
    if not labels.any() or labels.all():
        labels[0] = True
        labels[1] = False
    points, ap = pr_curve(scores, labels)
    oracle_points, oracle_ap = brute_force_pr(list(scores), list(labels))
    assert len(points) == len(oracle_points)
    for (p, r, t), (op, orr, ot) in zip(points, oracle_points):
        assert p == pytest.approx(op, abs=1e-12)
        assert r == pytest.approx(orr, abs=1e-12)
        assert t == pytest.approx(ot, abs=1e-12)
    assert ap == pytest.approx(oracle_ap, abs=1e-12)


def test_pr_inverted_scores_match_oracle():
    rng = np.random.default_rng(15)
    labels = rng.uniform(size=40) < 0.5
    if not labels.any() or labels.all():
        labels[0] = True
        labels[1] = False
    scores = np.where(labels, 1.0, 0.0)  # perfectly wrong ranking
    _, ap = pr_curve(scores, labels)
    _, oracle_ap = brute_force_pr(list(scores), list(labels))
    assert ap == pytest.approx(oracle_ap, abs=1e-9)


def test_pr_single_class_rejected():
    with pytest.raises(UndefinedPrecisionError):
        pr_curve(np.array([1.0, 2.0]), np.array([True, True]))


def test_pr_recall_non_decreasing_property():
    rng = np.random.default_rng(16)
    for _ in range(20):
        n = int(rng.integers(4, 50))
        scores = rng.uniform(size=n).round(1)
        labels = rng.uniform(size=n) < 0.5
        if not labels.any() or labels.all():
            continue
        points, ap = pr_curve(scores, labels)
        recalls = [r for _, r, _ in points]
        assert all(b >= a for a, b in zip(recalls, recalls[1:]))
        assert 0.0 <= ap <= 1.0


# -- report ------------------------------------------------------------------------

def test_eval_report_roundtrip_and_text():
    report = EvalReport(
        topk=[0.2, 0.3, 0.4, 0.5, 0.6],
        pr_points=[(1.0, 0.5, 0.1), (0.8, 1.0, 0.9)],
        average_precision=0.9,
        n_positive=10,
        n_negative=20,
    )
    back = EvalReport.from_json(report.to_json())
    assert back.topk == report.topk
    assert back.average_precision == report.average_precision
    text = report.to_text()
    assert "top-1" in text and "top-5" in text and "AP=0.9" in text
    csv = report.pr_csv()
    assert csv.splitlines()[0] == "precision,recall,threshold"
    assert report.prevalence == pytest.approx(1 / 3)


def test_calibrate_delta_maximizes_f1():
    scores = np.array([0.1, 0.2, 0.3, 0.9, 1.0])
    labels = np.array([True, True, True, False, False])
    delta = calibrate_delta(scores, labels)
    assert delta == pytest.approx(0.3)
