import numpy as np
import pytest

from diffusense.experiments import (
    DEFAULT_BETA,
    DEFAULT_Q,
    SweepError,
    SweepSpec,
    UsageError,
    point_seed,
    run_sweep,
    run_transition,
)


def test_defaults_mirror_figure_axes():
    spec = SweepSpec()
    assert spec.q_values == DEFAULT_Q == tuple(range(1, 37))
    assert spec.beta_values == DEFAULT_BETA and len(DEFAULT_BETA) == 21
    assert spec.orders == (1, 2, 3) and spec.samples == 1024 and spec.seeds == 10


@pytest.mark.parametrize("kwargs", [
    dict(q_values=()), dict(orders=()), dict(beta_values=()), dict(estimators=()),
    dict(estimators=("music",)), dict(beta_values=(1.5,)), dict(seeds=0),
    dict(covariance_mode="exact"), dict(correlation="partial"),
])
def test_spec_validation(kwargs):
    with pytest.raises(UsageError):
        SweepSpec(**kwargs)


def test_analytic_landmarks():
    betas = DEFAULT_BETA
    res = run_sweep(SweepSpec(estimators=("comedie", "dirac"), orders=(3,), q_values=(1, 2),
                              beta_values=betas, covariance_mode="analytic"))
    for b in betas:
        assert res.lookup("comedie", 3, 1, b).mean == pytest.approx(b, abs=1e-12)
    assert res.lookup("dirac", 3, 2, 0.0).mean == 1.0
    ident = run_sweep(SweepSpec(estimators=("comedie",), orders=(3,), q_values=(1, 5, 17, 36),
                                beta_values=(0.0, 0.4, 0.8), correlation="identical",
                                covariance_mode="analytic"))
    for r in ident.records:
        assert r.mean == pytest.approx(r.beta, abs=1e-12)
        assert r.std == 0.0


def test_records_and_metadata():
    spec = SweepSpec(orders=(1, 2), q_values=(1, 3), beta_values=(0.0, 0.5, 1.0), seeds=2, samples=256)
    res = run_sweep(spec)
    assert len(res.records) == 3 * 2 * 2 * 3
    assert all(0.0 <= r.mean <= 1.0 and r.std >= 0.0 for r in res.records)
    assert {"generator", "packing", "seed_base", "backend"} <= set(res.metadata)
    betas, qs, m = res.matrix("comedie", 2)
    assert betas == [0.0, 0.5, 1.0] and qs == [1, 3] and not np.isnan(m).any()
    lines = res.to_matrix_csv("dirac", 1).splitlines()
    assert lines[0] == "beta,Q=1,Q=3" and len(lines) == 4
    assert res.to_long_csv().splitlines()[0] == "estimator,L,Q,beta,mean,std"


def test_reproducible_and_thread_independent():
    spec = SweepSpec(orders=(1, 3), q_values=(1, 4, 9), beta_values=(0.0, 0.35, 1.0), seeds=3, samples=512)
    a = run_sweep(spec, threads=1)
    b = run_sweep(spec, threads=4)
    c = run_sweep(spec, threads=3)
    assert a.records == b.records == c.records
    other = run_sweep(SweepSpec(**{**spec.__dict__, "seed": 1}), threads=1)
    assert other.records != a.records


def test_analytic_mode_bit_reproducible():
    spec = SweepSpec(orders=(2,), q_values=(4, 7), beta_values=(0.1, 0.6), covariance_mode="analytic")
    assert run_sweep(spec).to_long_csv() == run_sweep(spec, threads=2).to_long_csv()


def test_point_seed_independent_of_beta_and_distinct():
    seeds = {point_seed(0, l, q, k) for l in (1, 2) for q in (1, 2) for k in range(3)}
    assert len(seeds) == 12
    assert point_seed(7, 3, 4, 0) == point_seed(7, 3, 4, 0)


def test_failing_point_is_identified(monkeypatch):
    import diffusense.experiments as ex

    def boom(c, name):
        raise FloatingPointError("bad")

    monkeypatch.setattr(ex, "estimate", boom)
    with pytest.raises(SweepError) as err:
        run_sweep(SweepSpec(orders=(2,), q_values=(5,), beta_values=(0.25,), seeds=1, samples=64))
    assert err.value.point == {"L": 2, "Q": 5, "beta": 0.25}


def test_transition_landmarks():
    res = run_transition([1, 3], [1, 4], samples=4096, seeds=10)
    assert res.lookup("xi", 3, 1, 0.0).mean == pytest.approx(0.94, abs=0.01)
    assert res.lookup("xi", 1, 4, 0.0).mean <= 0.1
    table = res.to_transition_csv().splitlines()
    assert table[0] == "L,Q=1,Q=4" and len(table) == 3
    with pytest.raises(UsageError):
        run_transition([3], [])


def test_transition_needs_about_channel_count_sources_at_order_4():
    qs = (9, 16, 25, 36)
    res = run_transition([4], qs, samples=4096, seeds=10)
    xi = {q: res.lookup("xi", 4, q, 0.0).mean for q in qs}
    assert xi[9] > 0.1 and xi[16] > 0.1
    assert xi[36] <= 0.1


@pytest.mark.slow
def test_empirical_converges_to_analytic_on_full_grid():
    analytic = run_sweep(SweepSpec(covariance_mode="analytic"), threads=2)
    empirical = run_sweep(SweepSpec(samples=16384, seeds=10), threads=2)
    gap = max(abs(r.mean - analytic.lookup(r.estimator, r.order, r.q, r.beta).mean)
              for r in empirical.records)
    assert gap <= 0.05
