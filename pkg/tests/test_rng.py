import numpy as np
import pytest

from npinfer import rng as streams


def test_same_path_same_draws():
    a = streams.stream(7, streams.POLYA, 3, 1, 0).random(8)
    b = streams.stream(7, streams.POLYA, 3, 1, 0).random(8)
    assert np.array_equal(a, b)


def test_distinct_paths_differ():
    a = streams.stream(7, streams.SAMPLE_BOOT, 0, 1).random(8)
    b = streams.stream(7, streams.SAMPLE_BOOT, 1, 0).random(8)
    c = streams.stream(7, streams.REFERENCE_BOOT, 0, 1).random(8)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_root_seed_changes_everything():
    a = streams.stream(1, streams.POPULATION).random(4)
    b = streams.stream(2, streams.POPULATION).random(4)
    assert not np.array_equal(a, b)


def test_stage_tags_are_distinct_and_stable():
    tags = list(streams.STAGE_TAGS.values())
    assert len(set(tags)) == len(tags)
    assert streams.STAGE_TAGS["polya"] == streams.POLYA
    assert streams.STAGE_TAGS["population"] == streams.POPULATION


def test_negative_components_rejected():
    with pytest.raises(ValueError):
        streams.stream(-1, 0)
    with pytest.raises(ValueError):
        streams.stream(1, -2)
