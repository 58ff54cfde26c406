import io

import numpy as np
import pytest

from costconv.claims import build_cohort, mini_taxonomy
from costconv.cohort import ARCHETYPES, CohortSpec, generate_cohort, read_labels, write_labels
from costconv.evalkit import mape

MINI = mini_taxonomy()


def cohort(**kw):
    spec = CohortSpec(taxonomy=MINI, **kw)
    claims, labels = generate_cohort(spec)
    return spec, claims, labels, build_cohort(claims, spec.taxonomy, spec.windowing, list(labels))


def test_empty_cohort():
    claims, labels = generate_cohort(CohortSpec(0, taxonomy=MINI))
    assert claims == [] and labels == {}


def test_noise_free_healthy_targets_equal_base():
    spec, _, labels, c = cohort(n_patients=60, seed=4, archetype_mix={"healthy": 1.0}, noise_level=0.0)
    assert set(labels.values()) == {"healthy"}
    np.testing.assert_array_equal(c.y, np.full(60, spec.target.base_of("healthy")))


def test_same_spec_same_claims():
    a = generate_cohort(CohortSpec(40, seed=11, taxonomy=MINI))
    b = generate_cohort(CohortSpec(40, seed=11, taxonomy=MINI))
    assert a == b
    assert [c.to_json() for c in a[0]] == [c.to_json() for c in b[0]]


def test_distinct_seeds_differ():
    assert generate_cohort(CohortSpec(20, seed=1, taxonomy=MINI))[0] != \
        generate_cohort(CohortSpec(20, seed=2, taxonomy=MINI))[0]


def test_patients_do_not_depend_on_cohort_size():
    small, _ = generate_cohort(CohortSpec(5, seed=9, taxonomy=MINI))
    big, _ = generate_cohort(CohortSpec(50, seed=9, taxonomy=MINI))
    assert big[:len(small)] == small


def test_chronic_costs_more_than_spike():
    _, _, labels, c = cohort(n_patients=1000, seed=2024, archetype_mix={"chronic": 0.5, "spike": 0.5})
    arch = np.array(list(labels.values()))
    assert c.y[arch == "chronic"].mean() > c.y[arch == "spike"].mean()


def test_archetype_oracle_beats_global_mean():
    _, _, labels, c = cohort(n_patients=1500, seed=5)
    arch = np.array(list(labels.values()))
    train, test = np.arange(1000), np.arange(1000, 1500)
    means = {a: c.y[train][arch[train] == a].mean() for a in ARCHETYPES}
    oracle = np.array([means[a] for a in arch[test]])
    assert mape(c.y[test], oracle) < mape(c.y[test], np.full(500, c.y[train].mean()))


def test_invalid_mix_rejected():
    with pytest.raises(ValueError):
        CohortSpec(10, archetype_mix={"healthy": 0.5, "chronic": 0.4})
    with pytest.raises(ValueError):
        CohortSpec(10, archetype_mix={"sick": 1.0})
    # within tolerance
    CohortSpec(10, archetype_mix={"healthy": 0.5, "chronic": 0.5 + 5e-10})


def test_labels_round_trip():
    _, labels = generate_cohort(CohortSpec(15, seed=3, taxonomy=MINI))
    buf = io.StringIO()
    write_labels(labels, buf)
    buf.seek(0)
    assert read_labels(buf) == labels


def test_matrices_nonnegative_and_targets_positive():
    _, _, _, c = cohort(n_patients=200, seed=8)
    assert c.X.shape == (200, 60, 24)
    assert (c.X >= 0).all() and (c.y >= 0).all()
