import math

import numpy as np
import pytest

from propfuse import NumericDomainError, ValidationError, evaluate, pair_metrics
from propfuse.metrics import read_pairs_csv, write_report_csv, write_report_json


class TestPairMetrics:
    def test_direct_arithmetic(self):
        ade, alde, ape, mnre = pair_metrics(10.0, 8.0)
        assert ade == 2.0
        assert alde == pytest.approx(math.log(1.25), rel=1e-12)
        assert ape == pytest.approx(0.2, rel=1e-12)
        assert mnre == 0.8

    def test_perfect_prediction(self):
        assert pair_metrics(3.7, 3.7) == (0.0, 0.0, 0.0, 1.0)

    def test_three_orders_of_magnitude(self):
        ade, alde, ape, mnre = pair_metrics(1.0, 1000.0)
        assert ade == 999.0
        assert alde == pytest.approx(math.log(1000.0), rel=1e-12)
        assert ape == 999.0
        assert mnre == 0.001

    @pytest.mark.parametrize("bad", [0.0, -1.0, math.nan, math.inf])
    def test_nonpositive_inputs_rejected(self, bad):
        with pytest.raises(NumericDomainError):
            pair_metrics(bad, 1.0)
        with pytest.raises(NumericDomainError):
            pair_metrics(1.0, bad)

    def test_mnre_symmetry(self):
        rng = np.random.default_rng(81)
        for _ in range(100):
            m, m_hat = rng.uniform(0.01, 100, size=2)
            assert pair_metrics(m, m_hat)[3] == pair_metrics(m_hat, m)[3]

    def test_mnre_equals_exp_of_negative_alde(self):
        rng = np.random.default_rng(82)
        for _ in range(1000):
            m, m_hat = np.exp(rng.uniform(-7, 7, size=2))
            _, alde, _, mnre = pair_metrics(float(m), float(m_hat))
            assert mnre == pytest.approx(math.exp(-alde), rel=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(83)
        for _ in range(50):
            m, m_hat, scale = rng.uniform(0.1, 50, size=3)
            ade, alde, ape, mnre = pair_metrics(m, m_hat)
            ade_s, alde_s, ape_s, mnre_s = pair_metrics(scale * m, scale * m_hat)
            assert ade_s == pytest.approx(scale * ade, rel=1e-9)
            assert alde_s == pytest.approx(alde, rel=1e-9, abs=1e-12)
            assert ape_s == pytest.approx(ape, rel=1e-9)
            assert mnre_s == pytest.approx(mnre, rel=1e-9)


class TestEvaluate:
    def test_means_of_item_metrics(self):
        report = evaluate([(10.0, 8.0), (10.0, 10.0)])
        assert report.ade == pytest.approx(1.0)
        assert report.ape == pytest.approx(0.1)
        assert report.mnre == pytest.approx(0.9)
        assert report.alde == pytest.approx(math.log(1.25) / 2, rel=1e-9)
        assert report.n == 2

    def test_empty_list_errors(self):
        with pytest.raises(ValidationError, match="empty"):
            evaluate([])

    def test_singleton_equals_pair_metrics(self):
        report = evaluate([(7.0, 5.0)])
        assert (report.ade, report.alde, report.ape, report.mnre) == pair_metrics(7.0, 5.0)

    def test_error_names_offending_item(self):
        with pytest.raises(NumericDomainError, match="item 1 \\(id 'b'\\)"):
            evaluate([(1.0, 1.0), (0.0, 1.0)], ids=["a", "b"])

    def test_rows_keep_input_order(self):
        report = evaluate([(1.0, 2.0), (3.0, 4.0)], ids=["x", "y"])
        assert [r.item_id for r in report.rows] == ["x", "y"]


class TestCsvInterface:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "pairs.csv"
        path.write_text("id,ground_truth,prediction\nmug,1.5,1.2\npan,2.5,3.0\n")
        ids, pairs = read_pairs_csv(path)
        assert ids == ["mug", "pan"]
        report = evaluate(pairs, ids)
        out_csv = tmp_path / "report.csv"
        out_json = tmp_path / "report.json"
        write_report_csv(report, out_csv)
        write_report_json(report, out_json)
        assert "mug" in out_csv.read_text()
        assert '"n": 2' in out_json.read_text()

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "pairs.csv"
        path.write_text("identifier,truth,pred\na,1,1\n")
        with pytest.raises(ValidationError, match="header"):
            read_pairs_csv(path)

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "pairs.csv"
        path.write_text("id,ground_truth,prediction\na,1.0,2.0\nb,oops,2.0\n")
        with pytest.raises(ValidationError, match=":3:"):
            read_pairs_csv(path)

    def test_wrong_column_count_names_line(self, tmp_path):
        path = tmp_path / "pairs.csv"
        path.write_text("id,ground_truth,prediction\na,1.0\n")
        with pytest.raises(ValidationError, match=":2:"):
            read_pairs_csv(path)
