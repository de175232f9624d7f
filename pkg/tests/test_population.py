import math

import numpy as np
import pytest

from npinfer import population
from npinfer.config import SimConfig
from npinfer.errors import CalibrationError


def small_cfg(**kw):
    base = dict(N=600, H=6, M_h=10, N_hj=10, n_A=60, n_R=60, m_h=2, n_hj=5,
                gamma1=0.3, B=4, L=2, K=1, seed=5)
    base.update(kw)
    return SimConfig(**base)


@pytest.fixture(scope="module")
def pop():
    return population.generate_population(small_cfg(), seed=5, scenario="LIN")


def test_structure(pop):
    assert len(pop) == 600
    assert pop.stratum.min() == 0 and pop.stratum.max() == 5
    assert np.all(np.bincount(pop.stratum) == 100)
    # clusters are globally numbered, 10 per stratum, 10 units each
    assert np.all(np.bincount(pop.cluster) == 10)
    assert pop.cluster.max() == 59


def test_membership_alignment(pop):
    # every unit's cluster belongs to its stratum
    assert np.array_equal(pop.psu_stratum[pop.cluster], pop.stratum)


def test_selection_probabilities_calibrated(pop):
    assert pop.pi_a.sum() == pytest.approx(60.0, abs=1e-6)
    assert np.all((pop.pi_a > 0) & (pop.pi_a < 1))
    # monotone in x because gamma1 > 0
    order = np.argsort(pop.x)
    assert np.all(np.diff(pop.pi_a[order]) >= 0)


def test_reference_weight_is_inverse_share(pop):
    w = 1.0 / (pop.psu_share[pop.cluster] * pop.ssu_share)
    assert np.allclose(pop.w_ref, w)
    assert np.all(pop.w_ref > 0)


def test_design_weight_consistent_with_inclusions(pop):
    w = 1.0 / (pop.psu_inclusion[pop.cluster] * pop.ssu_inclusion)
    assert np.allclose(pop.design_weight, w)
    # HT identity: sum over population of pi equals expected sample size
    n_expected = pop.H * pop.m_h * pop.n_hj
    total = float((pop.psu_inclusion[pop.cluster] * pop.ssu_inclusion).sum())
    assert total == pytest.approx(n_expected, rel=1e-9)


def test_covariate_location_and_correlation(pop):
    logw = np.log(pop.w_ref)
    resid = pop.x - population.X_OFFSET - logw
    # x = offset + log w + noise; the noise scale targets corr(x, log w) = 0.5
    r = np.corrcoef(pop.x, logw)[0, 1]
    assert abs(r - population.NOISE_CORRELATION) < 0.08
    assert abs(resid.mean()) < 3 * resid.std() / math.sqrt(len(pop))


def test_true_means_match_population_averages(pop):
    assert pop.true_mean_continuous == pytest.approx(float(pop.y_cont.mean()))
    assert pop.true_mean_binary == pytest.approx(float(pop.y_bin.mean()))
    assert set(np.unique(pop.y_bin)) <= {0.0, 1.0}


def test_scenarios_share_the_same_realisations():
    a = population.generate_population(small_cfg(), seed=5, scenario="LIN")
    b = population.generate_population(small_cfg(), seed=5, scenario="SIN")
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.w_ref, b.w_ref)
    assert np.array_equal(a.cluster, b.cluster)
    assert not np.array_equal(a.y_cont, b.y_cont)


def test_generation_is_reproducible():
    a = population.generate_population(small_cfg(), seed=9, scenario="EXP")
    b = population.generate_population(small_cfg(), seed=9, scenario="EXP")
    assert np.array_equal(a.y_cont, b.y_cont)
    assert a.gamma0 == b.gamma0
    c = population.generate_population(small_cfg(), seed=10, scenario="EXP")
    assert not np.array_equal(a.y_cont, c.y_cont)


def test_scenario_functions():
    x = np.array([-2.0, 0.0, 1.0, 3.0])
    assert np.allclose(population.scenario_function("LIN")(x), x)
    assert np.allclose(population.scenario_function("CUB")(x), (x / 3.0) ** 3)
    assert np.allclose(population.scenario_function("EXP")(x), np.exp(x / 2.0) / 5.0)
    assert np.allclose(population.scenario_function("SIN")(x), 5.0 * np.sin(np.pi * x / 2.0))
    with pytest.raises(KeyError):
        population.scenario_function("NOPE")


def test_random_effect_scale():
    # icc = s^2 / (s^2 + v) inverted for s
    s = population.random_effect_scale(0.2, 4.0)
    assert 0.2 == pytest.approx(s * s / (s * s + 4.0))
    assert population.random_effect_scale(0.0, 4.0) == 0.0


def test_calibration_solves_the_expected_count():
    rng = np.random.default_rng(0)
    x = rng.normal(size=500)
    g0 = population.calibrate_gamma0(x, 0.3, 50.0)
    p = 1.0 / (1.0 + np.exp(-(g0 + 0.3 * x)))
    assert p.sum() == pytest.approx(50.0, abs=1e-6)


def test_calibration_failure_is_loud():
    x = np.zeros(10)
    with pytest.raises(CalibrationError):
        population.calibrate_gamma0(x, 0.0, 20.0)  # target exceeds n


def test_psu_size_ratio_bounded(pop):
    # stratum shifts tame the exponential tails: within a stratum the largest
    # shifted PSU measure stays within the target ratio of the smallest
    for h in range(pop.H):
        mos = pop.mos_psu[pop.psu_stratum == h] + pop.stratum_shift[h]
        assert mos.max() / mos.min() <= population.PSU_RATIO_TARGET + 1e-9


def test_binary_prevalence_is_moderate(pop):
    assert 0.03 < pop.true_mean_binary < 0.6


def test_csv_export_schema(tmp_path, pop):
    out = tmp_path / "pop.csv"
    population.population_to_csv(pop, str(out))
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(population.POPULATION_CSV_HEADER)
    assert len(lines) == len(pop) + 1
    first = lines[1].split(",")
    assert first[0] == "0"
    assert float(first[3]) == pytest.approx(pop.x[0])
