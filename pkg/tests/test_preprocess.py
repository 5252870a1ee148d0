"""Imputation and series extraction against brute-force expectations."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bcgsleep.core import EPOCH_ZERO, NightRecord
from bcgsleep.errors import AllMissing
from bcgsleep.preprocess import clean_for_features, impute_missing, raw_hr_series

from conftest import flat_record, make_sample


def _impute_oracle(series):
    """Scan for each hole: previous present value, else the next one."""
    out = []
    for i, v in enumerate(series):
        if v is not None:
            out.append(v)
            continue
        fill = None
        for j in range(i - 1, -1, -1):
            if series[j] is not None:
                fill = series[j]
                break
        if fill is None:
            for j in range(i + 1, len(series)):
                if series[j] is not None:
                    fill = series[j]
                    break
        out.append(fill)
    return out


holey_series = st.lists(
    st.one_of(st.none(), st.floats(0.0, 100.0, allow_nan=False)),
    min_size=1,
    max_size=50,
).filter(lambda s: any(v is not None for v in s))


class TestImputeMissing:
    @given(series=holey_series)
    def test_matches_nearest_scan(self, series):
        assert impute_missing(series) == _impute_oracle(series)

    def test_previous_preferred(self):
        assert impute_missing([1.0, None, 9.0]) == [1.0, 1.0, 9.0]

    def test_leading_holes_take_next(self):
        assert impute_missing([None, None, 4.0, None]) == [4.0, 4.0, 4.0, 4.0]

    def test_present_values_untouched(self):
        series = [3.0, 1.0, 2.0]
        assert impute_missing(series) == series

    def test_all_missing_raises(self):
        with pytest.raises(AllMissing):
            impute_missing([None, None])

    def test_input_not_mutated(self):
        series = [None, 5.0]
        impute_missing(series)
        assert series == [None, 5.0]


class TestRawHrSeries:
    def test_gaps_become_none(self):
        rec = flat_record(6, missing={2, 3})
        series = raw_hr_series(rec)
        assert series == [60.0, 60.0, None, None, 60.0, 60.0]

    def test_zero_hr_preserved(self):
        samples = [make_sample(0, hr=60.0), make_sample(1, hr=0.0)]
        rec = NightRecord("n", "s", EPOCH_ZERO, samples)
        assert raw_hr_series(rec) == [60.0, 0.0]


class TestCleanForFeatures:
    def test_fills_every_second(self):
        rec = flat_record(10, missing={4, 5})
        clean = clean_for_features(rec)
        assert [s.t for s in clean.samples] == list(range(10))
        assert clean.gaps == ()

    def test_gap_seconds_copy_previous_sample(self):
        samples = [make_sample(0, hr=55.0, rr=10.0), make_sample(3, hr=66.0)]
        rec = NightRecord("n", "s", EPOCH_ZERO, samples)
        clean = clean_for_features(rec)
        assert clean.samples[1].hr == 55.0
        assert clean.samples[1].rr == 10.0
        assert clean.samples[2].hr == 55.0
        assert clean.samples[3].hr == 66.0

    def test_zero_hr_second_treated_as_hole_in_all_signals(self):
        samples = [
            make_sample(0, hr=55.0, rr=10.0, sv=60.0, hrv=30.0, b2b=900.0),
            make_sample(1, hr=0.0, rr=99.0, sv=99.0, hrv=99.0, b2b=99.0),
            make_sample(2, hr=70.0),
        ]
        rec = NightRecord("n", "s", EPOCH_ZERO, samples)
        clean = clean_for_features(rec)
        # the whole second is suspect: every signal comes from t=0, not t=1
        assert clean.samples[1].vitals() == samples[0].vitals()

    def test_valid_samples_pass_through(self):
        rec = flat_record(5)
        clean = clean_for_features(rec)
        assert clean.samples == rec.samples

    def test_metadata_and_labels_preserved(self):
        rec = flat_record(5)
        from bcgsleep.core import Stage, StageInterval

        rec = NightRecord(
            rec.night_id, rec.subject_id, rec.start_epoch, rec.samples,
            labels=(StageInterval(Stage.WAKE, 0, 5),),
        )
        clean = clean_for_features(rec)
        assert clean.night_id == rec.night_id
        assert clean.labels == rec.labels

    def test_all_zero_hr_raises(self):
        samples = [make_sample(0, hr=0.0), make_sample(1, hr=0.0)]
        rec = NightRecord("n", "s", EPOCH_ZERO, samples)
        with pytest.raises(AllMissing):
            clean_for_features(rec)
