import itertools

import pytest

from tempsynth.longterm.scripts import generate_longterm_sample
from tempsynth.model import Family, QuestionMode, ShortTask
from tempsynth.qa import instantiate
from tempsynth.rng import new_rng
from tempsynth.shortterm.tasks import generate_shortterm_sample

GROUPS = [(t.value, None) for t in ShortTask] + [(f.value, m.value) for f in Family for m in QuestionMode]


def make_sample(group, mode, seed, mcq=True):
    """A QA sample built straight from the generators, without rendering."""
    rng = new_rng(seed)
    if mode is None:
        s = generate_shortterm_sample(group, rng, seed=seed)
        truth, meta = s.truth, {"seed": seed, "kind": "shortterm"}
    else:
        s = generate_longterm_sample(group, mode, rng, seed=seed)
        truth, meta = s.truth, {"seed": seed, "kind": "longterm", "question_mode": mode}
    sid = f"{group}-{seed:010d}" if mode is None else f"{group}-{mode}-{seed:010d}"
    return instantiate(group, truth, meta, rng, sample_id=sid, video_path=f"videos/{sid}.mp4",
                       metadata_path=f"videos/{sid}.json", mcq=mcq), s


@pytest.fixture(scope="session")
def mcq_samples():
    """100 MCQ samples spread over every task type and (family, mode) pair."""
    out = []
    for k, (group, mode) in zip(range(100), itertools.cycle(GROUPS)):
        out.append(make_sample(group, mode, 500 + k)[0])
    return out
