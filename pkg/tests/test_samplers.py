import numpy as np
import pytest
from scipy import stats

from src.common.exceptions import ChainAbortedError
from src.diagnostics.statistics import integrated_autocorrelation_time, rejection_rate
from src.lifting.space import LiftedState, make_rotation_drift
from src.proposals.kernels import make_kernel
from src.samplers.chain import ChainConfig, replicate_seed, run_chain
from src.samplers.factory import SamplerSpec, build_step_fn, initial_state
from src.samplers.steps import gmala_step, mala_step
from src.targets.potentials import Observable, Target, make_builtin_target

FIRST = Observable("x1", lambda x: float(x[0]))


def _flat_target():
    return Target("flat", 2, lambda x: 0.0, lambda x: np.zeros(2), lambda x: np.zeros((2, 2)))


def _chain(spec, h, n_steps, seed=1, burn_in=0, observable=FIRST, keep_trace=False, xi=1):
    cfg = ChainConfig(h, n_steps, burn_in, seed, initial_state(2, initial_xi=xi))
    return run_chain(build_step_fn(spec), cfg, observable, keep_trace=keep_trace)


def test_mala_on_flat_potential_always_accepts():
    rng = np.random.default_rng(0)
    x = np.zeros(2)
    for _ in range(500):
        x, accepted = mala_step(_flat_target(), x, 0.3, rng)
        assert accepted


def test_mala_small_step_acceptance():
    result = _chain(SamplerSpec("mala"), 1e-4, 2000)
    assert result.acceptance_rate >= 0.999


def test_gmala_rejection_flips_direction_in_place():
    target = make_builtin_target("anisotropic")
    skew = make_rotation_drift(1.0)
    kernel = make_kernel("q1")
    rng = np.random.default_rng(3)
    s = LiftedState(np.array([0.5, 0.5]), 1)
    rejections = 0
    for _ in range(300):
        rec = gmala_step(target, skew, kernel, s, 0.5, rng)
        if rec.accepted:
            assert rec.state.xi == s.xi
        else:
            rejections += 1
            assert np.array_equal(rec.state.x, s.x)
            assert rec.state.xi == -s.xi
        s = rec.state
    assert rejections > 0


@pytest.mark.parametrize("kernel", ["q1", "q2", "q3"])
def test_gmala_flips_equal_rejections(kernel):
    spec = SamplerSpec("gmala", target="anisotropic", kernel=kernel, alpha=1.0)
    result = _chain(spec, 0.2, 3000)
    assert result.n_rejections > 0
    assert result.n_flips == result.n_rejections


def test_ghmala_flips_equal_hybrid_rejections():
    spec = SamplerSpec("ghmala", target="anisotropic", integrator="midpoint", alpha=3.0)
    result = _chain(spec, 0.2, 3000)
    assert result.n_hybrid_rejections > 0
    assert result.n_flips == result.n_hybrid_rejections
    assert result.hybrid_accept_probs is not None


def test_zero_alpha_reduces_to_mala():
    h, n = 0.1, 2000
    mala = _chain(SamplerSpec("mala", target="anisotropic"), h, n, keep_trace=True)
    gmala = _chain(SamplerSpec("gmala", target="anisotropic", kernel="q1", alpha=0.0), h, n, keep_trace=True)
    ghmala = _chain(
        SamplerSpec("ghmala", target="anisotropic", integrator="midpoint", alpha=0.0), h, n, keep_trace=True
    )
    assert np.array_equal(mala.trace, gmala.trace)
    assert np.array_equal(mala.trace, ghmala.trace)
    assert np.all(ghmala.hybrid_accepted)


def test_chain_is_deterministic_given_seed():
    spec = SamplerSpec("gmala", target="anisotropic", kernel="q2", alpha=1.0)
    a = _chain(spec, 0.05, 500, seed=42)
    b = _chain(spec, 0.05, 500, seed=42)
    assert a.time_average == b.time_average
    assert np.array_equal(a.f_values, b.f_values)
    assert a.picard_iters == b.picard_iters > 0
    assert a.gradient_calls == b.gradient_calls > 0


def test_time_average_edge_cases():
    spec = SamplerSpec("mala")
    const = _chain(spec, 0.1, 200, burn_in=20, observable=Observable("two", lambda x: 2.0))
    assert const.time_average == 2.0
    assert const.n_retained == 180

    last = _chain(spec, 0.1, 5, burn_in=4)
    assert last.n_retained == 1
    assert last.time_average == last.final_state.x[0]


def test_chain_config_validation():
    start = initial_state(2)
    with pytest.raises(ValueError):
        ChainConfig(0.0, 10, 0, 1, start)
    with pytest.raises(ValueError):
        ChainConfig(0.1, 0, 0, 1, start)
    with pytest.raises(ValueError):
        ChainConfig(0.1, 10, 10, 1, start)


def test_picard_divergence_aborts_chain():
    spec = SamplerSpec("gmala", target="anisotropic", kernel="q2", alpha=50.0)
    with pytest.raises(ChainAbortedError) as info:
        _chain(spec, 1.0, 100, seed=9)
    err = info.value
    assert err.step == 1
    assert err.seed == 9
    assert err.h == 1.0
    assert err.residual is not None
    assert "sampler=gmala-q2" in err.describe()


def test_replicate_seeds_are_distinct_and_stable():
    seeds = [replicate_seed(123, r) for r in range(100)]
    assert len(set(seeds)) == 100
    assert seeds == [replicate_seed(123, r) for r in range(100)]


def test_ghmala_mala_substep_rate_does_not_depend_on_alpha():
    rates = []
    for alpha in (0.1, 1.0):
        spec = SamplerSpec("ghmala", target="anisotropic", integrator="midpoint", alpha=alpha)
        rates.append(rejection_rate(spec, 0.05, 20_000, seed=5))
    combined = np.hypot(rates[0].stderr, rates[1].stderr)
    assert abs(rates[0].rate - rates[1].rate) <= 3 * combined


INVARIANCE_SPECS = [
    SamplerSpec("mala"),
    SamplerSpec("gmala", kernel="q1"),
    SamplerSpec("gmala", kernel="q2"),
    SamplerSpec("gmala", kernel="q3"),
    SamplerSpec("ghmala", integrator="midpoint"),
]


@pytest.mark.slow
@pytest.mark.parametrize("spec", INVARIANCE_SPECS, ids=lambda s: s.label)
def test_samplers_leave_standard_gaussian_invariant(spec):
    result = _chain(spec, 0.02, 100_000, seed=2024, burn_in=1000, keep_trace=True)
    trace = result.trace
    for moment, expected in ((trace, 0.0), (trace**2, 1.0)):
        for j in range(2):
            series = moment[:, j]
            se = np.sqrt(np.var(series) * integrated_autocorrelation_time(series) / series.size)
            assert abs(series.mean() - expected) <= 3 * se

    # binned goodness of fit on samples thinned to roughly independent draws
    thin = int(np.ceil(max(integrated_autocorrelation_time(trace[:, j]) for j in range(2))))
    edges = stats.norm.ppf(np.linspace(0.0, 1.0, 11))
    for j in range(2):
        observed, _ = np.histogram(trace[::thin, j], bins=edges)
        assert stats.chisquare(observed).pvalue > 0.001


@pytest.mark.slow
def test_initial_direction_does_not_change_estimator_law():
    spec = SamplerSpec("gmala", kernel="q2", alpha=1.0)
    ensembles = []
    for xi in (1, -1):
        ensembles.append(
            [_chain(spec, 0.1, 2000, seed=replicate_seed(77, r), burn_in=200, xi=xi).time_average for r in range(30)]
        )
    assert stats.ttest_ind(*ensembles).pvalue > 0.001
