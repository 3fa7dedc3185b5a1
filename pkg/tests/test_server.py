"""Aggregation of client reports and objective extraction."""

import numpy as np
import pytest

from fmlfs import aggregate, compute_local_report, discretize, objectives
from fmlfs.client import CdMatrix, ClientReport, MiMatrix
from fmlfs.server import AggregatedStats

from conftest import make_synthetic


def report_from(mi, cd, client_id, n=10):
    return ClientReport(
        mi=MiMatrix(np.asarray(mi, dtype=float), client_id, n),
        cd=CdMatrix(np.asarray(cd, dtype=float), client_id, n),
        client_id=client_id,
    )


def random_report(rng, client_id, d=4, num_labels=2, n=10):
    mi = rng.random((d, num_labels))
    half = np.triu(rng.random((d, d)), k=1)
    return report_from(mi, half + half.T, client_id, n)


class TestAggregate:
    def test_mean_of_identical_reports_is_identity(self):
        rng = np.random.default_rng(40)
        a = random_report(rng, 0)
        b = report_from(a.mi.values, a.cd.values, 1)
        stats = aggregate([a, b])
        assert (stats.mi_global == a.mi.values).all()
        assert (stats.cd_global == a.cd.values).all()

    def test_two_clients_average(self):
        zeros = np.zeros((2, 2))
        a = report_from(np.zeros((2, 1)), zeros, 0)
        b = report_from(np.ones((2, 1)), zeros, 1)
        stats = aggregate([a, b])
        assert (stats.mi_global == 0.5).all()

    def test_matches_sum_then_divide_oracle(self):
        rng = np.random.default_rng(41)
        reports = [random_report(rng, cid) for cid in range(3)]
        stats = aggregate(reports)
        mi_expected = sum(r.mi.values for r in reports) / 3
        cd_expected = sum(r.cd.values for r in reports) / 3
        assert np.abs(stats.mi_global - mi_expected).max() <= 1e-12
        assert np.abs(stats.cd_global - cd_expected).max() <= 1e-12

    def test_report_order_is_irrelevant(self):
        rng = np.random.default_rng(42)
        reports = [random_report(rng, cid) for cid in range(4)]
        forward = aggregate(reports)
        backward = aggregate(list(reversed(reports)))
        assert (forward.mi_global == backward.mi_global).all()
        assert (forward.cd_global == backward.cd_global).all()

    def test_weighted_mean(self):
        zeros = np.zeros((1, 1))
        a = report_from(np.array([[0.0]]), zeros, 0, n=30)
        b = report_from(np.array([[1.0]]), zeros, 1, n=10)
        stats = aggregate([a, b], weighted=True)
        assert stats.mi_global[0, 0] == pytest.approx(0.25)

    def test_fewer_than_two_reports_rejected(self):
        rng = np.random.default_rng(43)
        with pytest.raises(ValueError, match="at least 2"):
            aggregate([random_report(rng, 0)])

    def test_duplicate_client_id_rejected(self):
        rng = np.random.default_rng(44)
        with pytest.raises(ValueError, match="duplicate"):
            aggregate([random_report(rng, 1), random_report(rng, 1)])

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(45)
        with pytest.raises(ValueError, match="dimensions"):
            aggregate([random_report(rng, 0, d=4), random_report(rng, 1, d=5)])


class TestObjectives:
    def test_row_max_of_mi(self):
        stats = AggregatedStats(
            mi_global=np.array([[0.1, 0.9, 0.3]]),
            cd_global=np.zeros((1, 1)),
            num_clients=2,
        )
        pairs = objectives(stats)
        assert pairs[0].o1 == pytest.approx(0.9)

    def test_all_zero_cd_row(self):
        stats = AggregatedStats(
            mi_global=np.array([[0.2], [0.4]]),
            cd_global=np.zeros((2, 2)),
            num_clients=2,
        )
        pairs = objectives(stats)
        assert pairs[0].o2 == 0.0 and pairs[1].o2 == 0.0

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(46)
        mi = rng.random((5, 3))
        half = np.triu(rng.random((5, 5)), k=1)
        cd = half + half.T
        stats = AggregatedStats(mi_global=mi, cd_global=cd, num_clients=3)
        pairs = objectives(stats)
        for i, pair in enumerate(pairs):
            assert pair.feature_index == i
            assert pair.o1 == max(mi[i, :])
            assert pair.o2 == max(cd[i, :])

    def test_monotone_in_matrix_entries(self):
        rng = np.random.default_rng(47)
        mi = rng.random((4, 2))
        stats = AggregatedStats(mi_global=mi, cd_global=np.zeros((4, 4)), num_clients=2)
        before = objectives(stats)[2].o1
        bumped = mi.copy()
        bumped[2, 1] += 0.5
        after = objectives(AggregatedStats(bumped, np.zeros((4, 4)), 2))[2].o1
        assert after >= before

    def test_self_aggregation_fixed_point(self):
        # M copies of one report: objectives equal the single report's row maxima
        ds = make_synthetic(30, 5, 2, seed=48)
        report = compute_local_report(discretize(ds, 4), client_id=0)
        copies = [
            ClientReport(
                mi=MiMatrix(report.mi.values, cid, report.num_instances),
                cd=CdMatrix(report.cd.values, cid, report.num_instances),
                client_id=cid,
            )
            for cid in range(2)
        ]
        pairs = objectives(aggregate(copies))
        for i, pair in enumerate(pairs):
            assert pair.o1 == pytest.approx(report.mi.values[i].max(), abs=0)
            assert pair.o2 == pytest.approx(report.cd.values[i].max(), abs=0)
