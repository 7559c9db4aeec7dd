import numpy as np
import pytest
from scipy import integrate, stats

from contsrtp.clusters import INTERRUPTIBLE, ClusterSpec
from contsrtp.errors import IncompleteRecord
from contsrtp.metrics import (
    DayRecord,
    cumulative_regret,
    gaussian_kl,
    kl_marginal,
    suboptimal_count,
    suboptimal_rate,
    violation_difference,
    violation_summary,
    write_posterior_csv,
    write_records_csv,
    write_regret_csv,
    write_suboptimal_csv,
    write_violations_csv,
)
from contsrtp.population import PreferenceNoiseConfig, SensitivityModel


def rec(day, chosen=1, optimal=1, cost=10.0, best=10.0, flags=None):
    return DayRecord(day, 1, chosen, optimal, realized_cost=cost,
                     clairvoyant_expected_cost=best, chosen_expected_cost_under_true=cost,
                     violation_flags=flags or {})


def test_regret_zero_when_always_optimal():
    _, cum = cumulative_regret([rec(d) for d in range(1, 6)])
    assert np.all(cum == 0)


def test_regret_step():
    recs = [rec(1), rec(2), rec(3, chosen=2, cost=15.0), rec(4)]
    gaps, cum = cumulative_regret(recs)
    np.testing.assert_array_equal(gaps, [0, 0, 5, 0])
    np.testing.assert_array_equal(cum, [0, 0, 5, 5])


def test_same_price_contributes_nothing():
    # identical prices give identical expected costs whatever rounding says
    gaps, _ = cumulative_regret([rec(1, cost=10.0000001, best=10.0)])
    assert gaps[0] == 0.0


def test_cheaper_but_unsafe_choice_has_negative_gap():
    gaps, _ = cumulative_regret([rec(1, chosen=3, cost=7.0, best=10.0)])
    assert gaps[0] == -3.0


def test_incomplete_records():
    with pytest.raises(IncompleteRecord):
        cumulative_regret([])
    with pytest.raises(IncompleteRecord):
        cumulative_regret([rec(2), rec(1)])
    with pytest.raises(IncompleteRecord):
        cumulative_regret([DayRecord(1, 1, 1, 1)])
    with pytest.raises(IncompleteRecord):
        suboptimal_count([DayRecord(1, 1, 1)])


def test_alternating_suboptimal_days():
    recs = [rec(d, chosen=2 if d % 2 == 0 else 1) for d in range(1, 11)]
    assert suboptimal_count(recs)[-1] == 5
    assert suboptimal_rate(recs, 4) == 0.5


def test_count_tracks_nonzero_regret_increments():
    rng = np.random.default_rng(0)
    recs = [rec(d, chosen=int(rng.integers(1, 3)), cost=10 + rng.random()) for d in range(1, 50)]
    gaps, _ = cumulative_regret(recs)
    assert suboptimal_count(recs)[-1] == np.count_nonzero(gaps)


def test_kl_identical_is_zero():
    assert gaussian_kl([1.0, 2.0], [0.5, 0.5], [1.0, 2.0], [0.5, 0.5]) == 0.0


def test_kl_equal_variance():
    assert gaussian_kl([0.0], [2.0], [3.0], [2.0]) == pytest.approx(9 / 4)


def test_kl_against_quadrature():
    rng = np.random.default_rng(4)
    for _ in range(10):
        ma, mb = rng.normal(0, 2, 2)
        va, vb = rng.uniform(0.2, 3, 2)
        pa, pb = stats.norm(ma, np.sqrt(va)), stats.norm(mb, np.sqrt(vb))
        ref, _ = integrate.quad(lambda x: pa.pdf(x) * (pa.logpdf(x) - pb.logpdf(x)), -np.inf, np.inf, epsabs=1e-12)
        assert gaussian_kl([ma], [va], [mb], [vb]) == pytest.approx(ref, abs=1e-6)


def test_kl_between_candidates():
    specs = [ClusterSpec(INTERRUPTIBLE, 1, 2, 4.0, 1.0, beta=2.0)]
    noise = PreferenceNoiseConfig(0.5, 0.2, False)
    price = np.array([0.1, 0.2, 0.3])
    a = SensitivityModel(np.ones(3))
    assert kl_marginal(a, a, price, specs, noise) == 0.0
    assert kl_marginal(a, SensitivityModel(np.full(3, 2.0)), price, specs, noise) > 0
    quiet = PreferenceNoiseConfig(0.0, 0.0, False)
    assert kl_marginal(a, SensitivityModel(np.full(3, 2.0)), price, specs, quiet) == np.inf


def test_violation_summary():
    recs = [rec(1), rec(2, flags={"overflow": 2}), rec(3, flags={"under_voltage": 1, "overflow": 1}), rec(4)]
    s = violation_summary(recs)
    assert s.violating_days == 2
    assert s.by_kind == {"under_voltage": 1, "over_voltage": 0, "overflow": 3}
    np.testing.assert_array_equal(s.cumulative_days, [0, 1, 2, 2])
    np.testing.assert_array_equal(violation_difference(recs, [rec(d) for d in range(1, 5)]), [0, 1, 2, 2])


def test_writers(tmp_path):
    recs = [rec(1), rec(2, chosen=2, cost=12.0, flags={"overflow": 1})]
    write_regret_csv(recs, tmp_path / "r.csv")
    write_suboptimal_csv(recs, tmp_path / "s.csv")
    write_violations_csv(recs, tmp_path / "v.csv")
    write_records_csv(recs, tmp_path / "d.csv")
    write_posterior_csv([(1, [1, 2], [0.4, 0.6])], tmp_path / "p.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "day,instant_gap,cumulative" and lines[-1] == "2,2.0,2.0"
    assert (tmp_path / "s.csv").read_text().splitlines()[-1] == "2,1,2,1,1,1"
    assert (tmp_path / "v.csv").read_text().splitlines()[-1] == "2,0,0,1,1,,0"
    assert (tmp_path / "p.csv").read_text().splitlines()[1:] == ["1,1,0.4", "1,2,0.6"]
    assert "overflow" in (tmp_path / "d.csv").read_text().splitlines()[0]
