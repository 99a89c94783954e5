import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stscuc.metrics import (MetricError, VerificationRecord, accuracy, bnc, bnts,
                            error_histogram, histogram_csv, render_summary, signed_time_saved,
                            summarize, verification_csv, wrong_predictions)

binary = arrays(np.int64, st.tuples(st.integers(1, 3), st.integers(1, 4), st.integers(1, 5)),
                elements=st.integers(0, 1))
positive = st.floats(1e-3, 1e6)


class TestAccuracy:
    def test_identical(self):
        x = np.random.default_rng(0).integers(0, 2, (2, 3, 4))
        assert accuracy(x, x) == 1.0

    def test_one_mismatch(self):
        x = np.zeros((2, 3, 4), dtype=int)
        y = x.copy()
        y[1, 2, 3] = 1
        assert abs(accuracy(x, y) - (1 - 1 / 24)) <= 1e-12
        assert abs(accuracy(x, y) - 0.95833) < 1e-5

    def test_complement(self):
        x = np.random.default_rng(1).integers(0, 2, (2, 3, 4))
        assert accuracy(x, 1 - x) == 0.0

    def test_errors(self):
        with pytest.raises(MetricError):
            accuracy(np.zeros((2, 2)), np.zeros((2, 3)))
        with pytest.raises(MetricError):
            accuracy(np.full((2, 2), 0.5), np.zeros((2, 2)))

    @given(binary, st.data())
    def test_properties(self, x, data):
        y = data.draw(arrays(np.int64, x.shape, elements=st.integers(0, 1)))
        a = accuracy(x, y)
        assert 0.0 <= a <= 1.0
        assert a == accuracy(y, x)
        assert accuracy(x, x) == 1.0


class TestNormalized:
    @pytest.mark.parametrize("base, red, want", [(1000, 1000, 0.0), (1000, 1001, 0.1),
                                                 (1000, 999, 0.1)])
    def test_bnc(self, base, red, want):
        assert abs(bnc(base, red) - want) <= 1e-12

    @pytest.mark.parametrize("base, red, want", [(10, 6, 40.0), (10, 10, 0.0)])
    def test_bnts(self, base, red, want):
        assert abs(bnts(base, red) - want) <= 1e-12

    def test_signed(self):
        assert signed_time_saved(10, 6) == pytest.approx(40.0)
        assert signed_time_saved(10, 14) == pytest.approx(-40.0)
        assert bnts(10, 14) == pytest.approx(40.0)

    def test_nonpositive_base(self):
        for f in (bnc, bnts, signed_time_saved):
            with pytest.raises(MetricError):
                f(0, 1)
            with pytest.raises(MetricError):
                f(-1, 1)

    @given(positive, positive, st.floats(1e-3, 1e3))
    def test_scale_invariant(self, a, b, lam):
        assert bnc(a * lam, b * lam) == pytest.approx(bnc(a, b), rel=1e-9, abs=1e-9)
        assert bnts(a * lam, b * lam) == pytest.approx(bnts(a, b), rel=1e-9, abs=1e-9)


class TestHistogram:
    def test_all_zero(self):
        assert error_histogram([0, 0, 0]) == {0: 3}

    def test_example(self):
        assert error_histogram([0, 0, 1, 3]) == {0: 2, 1: 1, 3: 1}

    def test_csv(self):
        assert histogram_csv({0: 2, 3: 1}) == "wrong_predictions,samples\n0,2\n3,1\n"

    def test_negative(self):
        with pytest.raises(MetricError):
            error_histogram([1, -1])

    def test_wrong_predictions(self):
        pred = np.zeros((2, 45, 24), dtype=int)
        truth = pred.copy()
        truth[1, :2, :3] = 1
        assert wrong_predictions(pred, truth).tolist() == [0, 6]
        assert pred[0].size == 1080


class TestReport:
    def records(self):
        return [VerificationRecord(0, "VC-R", True, 1000, 10, 1001, 6, 2),
                VerificationRecord(1, "VC-R", True, 2000, 4, 2000, 5, 0),
                VerificationRecord(2, "VC-R", False, 1500, 3, math.nan, 1, 9, "Infeasible")]

    def test_summary(self):
        s = summarize(self.records())["VC-R"]
        assert (s["samples"], s["infeasible_samples"]) == (3, 1)
        assert s["bnc_pct"]["median"] == pytest.approx(0.05)
        assert s["time_saved_pct"]["median"] == pytest.approx((40 - 25) / 2)
        assert s["bnts_pct"]["mean"] == pytest.approx((40 + 25) / 2)

    def test_csv_columns(self):
        text = verification_csv(self.records())
        header = text.splitlines()[0].split(",")
        assert header[:10] == ["sample", "variant", "feasible", "base_cost", "red_cost", "bnc",
                               "base_time", "red_time", "bnts", "time_saved"]
        assert len(text.splitlines()) == 4

    def test_zero_infeasible_row(self):
        recs = self.records()[:2]
        assert "Infeasible samples (VC-R): 0" in render_summary(summarize(recs))

    def test_record_validation(self):
        with pytest.raises(MetricError):
            VerificationRecord(0, "V-R", True, 1000, -1, 1000, 1)
        with pytest.raises(MetricError):
            VerificationRecord(0, "V-R", True, 1000, 1, math.nan, 1)
