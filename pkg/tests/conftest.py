import hypothesis
import pytest

from bcgsleep.core import EPOCH_ZERO, NightRecord, VitalsSample

hypothesis.settings.register_profile(
    "ci", deadline=None, derandomize=True, max_examples=60
)
hypothesis.settings.load_profile("ci")


def make_sample(t, hr=60.0, rr=14.0, sv=70.0, hrv=40.0, b2b=1000.0):
    return VitalsSample(t=t, hr=hr, rr=rr, sv=sv, hrv=hrv, b2b=b2b)


def flat_record(n, hr=60.0, night_id="test", subject_id="subj", missing=()):
    """A constant-vitals record over [0, n) with selected seconds dropped."""
    missing = set(missing)
    samples = tuple(make_sample(t, hr=hr) for t in range(n) if t not in missing)
    from bcgsleep.core import compute_gaps

    return NightRecord(
        night_id=night_id,
        subject_id=subject_id,
        start_epoch=EPOCH_ZERO,
        samples=samples,
        gaps=compute_gaps([s.t for s in samples]),
    )


@pytest.fixture
def sample():
    return make_sample(0)
