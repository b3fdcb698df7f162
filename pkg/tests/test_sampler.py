import math

import numpy as np
import pytest

from scorelab import _kernels
from scorelab.errors import (RejectionError, SpecError,
                             UnsupportedOperationError)
from scorelab.metrics import moments
from scorelab.sampler import (STREAM_BACKWARD_INIT, STREAM_BACKWARD_STEP,
                              SamplerConfig, ScoreSource, backward_run,
                              constant_shift, exp_step, forward_sample,
                              make_score_source)
from scorelab.targets import catalog


# ---------------------------------------------------------------------------
# one integrator step


def test_exp_step_closed_form_values():
    dt = math.log(4.0)  # e^{dt/2} = 2, e^{dt} - 1 = 3
    assert exp_step(1.0, dt, 0.0, 0.0) == pytest.approx(2.0, rel=1e-15)
    assert exp_step(0.0, dt, 1.0, 0.0) == pytest.approx(2.0, rel=1e-15)
    assert exp_step(0.0, dt, 0.0, 1.0) == pytest.approx(math.sqrt(3.0),
                                                        rel=1e-15)


def test_exp_step_broadcasts_and_validates():
    x = np.array([[1.0, 2.0], [0.5, -1.0]])
    out = exp_step(x, 0.1, np.zeros_like(x), np.zeros_like(x))
    assert out == pytest.approx(math.exp(0.05) * x, rel=1e-15)
    with pytest.raises(SpecError):
        exp_step(x, 0.0, x, x)
    with pytest.raises(SpecError):
        exp_step(x, -0.1, x, x)


# ---------------------------------------------------------------------------
# configuration


def test_sampler_config_grid():
    cfg = SamplerConfig(T=1.0, N=4, delta=0.2)
    assert cfg.dt == pytest.approx(0.2, rel=1e-15)
    assert cfg.eval_times == pytest.approx((1.0, 0.8, 0.6, 0.4))
    assert all(b < a for a, b in zip(cfg.eval_times, cfg.eval_times[1:]))
    assert min(cfg.eval_times) > cfg.delta
    assert cfg.schedule == pytest.approx((0.4, 0.6, 0.8, 1.0))
    assert cfg.schedule[-1] == cfg.T


def test_sampler_config_validation():
    with pytest.raises(SpecError):
        SamplerConfig(T=0.0, N=4)
    with pytest.raises(SpecError):
        SamplerConfig(T=math.inf, N=4)
    with pytest.raises(SpecError):
        SamplerConfig(T=1.0, N=0)
    with pytest.raises(SpecError):
        SamplerConfig(T=1.0, N=4, delta=1.0)
    with pytest.raises(SpecError):
        SamplerConfig(T=1.0, N=4, delta=-0.1)
    with pytest.raises(SpecError):
        SamplerConfig(T=1.0, N=4, ensemble=0)
    with pytest.raises(SpecError):
        SamplerConfig(T=1.0, N=4, score_source="oracle")


# ---------------------------------------------------------------------------
# forward sampling


def test_forward_sample_is_deterministic():
    t = catalog("mixture2")
    a = forward_sample(t, 0.5, 500, seed=7)
    b = forward_sample(t, 0.5, 500, seed=7)
    c = forward_sample(t, 0.5, 500, seed=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_forward_sample_time_zero_is_initial_law():
    t = catalog("two_point")
    x = forward_sample(t, 0.0, 4000, seed=3)
    assert set(np.unique(x)) == {-1.0, 1.0}
    assert abs(x.mean()) < 5.0 / math.sqrt(4000)


def test_forward_second_moment_follows_ou_decay():
    t = catalog("mixture2")
    m2 = moments(t, 2)
    for fwd in (0.5, 2.0):
        x = forward_sample(t, fwd, 100_000, seed=5)
        s2 = (x * x).sum(axis=1)
        want = math.exp(-fwd) * m2 + (1.0 - math.exp(-fwd)) * t.dim
        se = s2.std(ddof=1) / math.sqrt(s2.size)
        assert abs(s2.mean() - want) < 5.0 * se


def test_forward_sample_compact_2d_respects_support():
    t = catalog("notched_square")
    x = forward_sample(t, 0.0, 5000, seed=1)
    assert x.shape == (5000, 2)
    assert np.abs(x).max() <= 2.0 + 1e-12
    in_notch = (x[:, 0] > 0) & (np.abs(x[:, 1]) < 1.0)
    assert not in_notch.any()
    assert np.linalg.norm(x, axis=1).max() <= t.compact.radius + 1e-12


def test_forward_sample_smooth_rejection_law():
    t = catalog("cosine_potential", a=1.0, b=1.0)
    x = forward_sample(t, 0.0, 50_000, seed=2)
    assert np.array_equal(x, forward_sample(t, 0.0, 50_000, seed=2))
    s2 = (x * x).sum(axis=1)
    se = s2.std(ddof=1) / math.sqrt(s2.size)
    assert abs(s2.mean() - moments(t, 2)) < 5.0 * se


def test_forward_sample_rejection_gives_up_honestly():
    # acceptance against the standard-normal envelope is ~sigma = 1e-5
    with pytest.raises(RejectionError):
        forward_sample(catalog("gaussian", sigma2=1e-10), 0.0, 50, seed=1)


def test_forward_sample_rejects_bad_arguments():
    t = catalog("mixture2")
    with pytest.raises(SpecError):
        forward_sample(t, -0.5, 10, seed=0)
    with pytest.raises(SpecError):
        forward_sample(t, 0.5, 0, seed=0)


# ---------------------------------------------------------------------------
# score sources


def test_exact_source_matches_closed_form():
    t = catalog("std_normal")
    src = make_score_source("exact", t)
    pts = np.linspace(-3, 3, 7)[:, None]
    assert src(0.8, pts) == pytest.approx(-pts, rel=1e-14)
    assert src.provenance == "exact:std_normal"
    assert src.dim == 1


def test_quadrature_source_agrees_with_exact():
    t = catalog("mixture2")
    exact = make_score_source("exact", t)
    quad = make_score_source("quadrature", t)
    pts = np.array([[0.7], [-1.3], [2.8]])
    diff = np.abs(quad(0.5, pts) - exact(0.5, pts)).max()
    assert diff <= 1e-8
    assert quad.provenance == "quadrature:mixture2"


def test_quadrature_source_on_compact_needs_early_stopping():
    t = catalog("two_point")
    with pytest.raises(UnsupportedOperationError):
        make_score_source("quadrature", t)
    with pytest.raises(UnsupportedOperationError):
        make_score_source("quadrature", t, SamplerConfig(T=1.0, N=4))
    cfg = SamplerConfig(T=1.0, N=4, delta=0.1)
    src = make_score_source("quadrature", t, cfg)
    vals = src(0.5, np.array([[0.3]]))
    assert np.isfinite(vals).all()


def test_perturbed_source_adds_shift():
    t = catalog("mixture2")
    exact = make_score_source("exact", t)
    shifted = make_score_source("perturbed", t, eta=constant_shift(0.25))
    pts = np.array([[0.4], [-2.0]])
    assert shifted(0.7, pts) == pytest.approx(exact(0.7, pts) + 0.25,
                                              rel=1e-14)
    assert shifted.provenance == "perturbed(exact:mixture2)"
    with pytest.raises(SpecError):
        make_score_source("perturbed", t)
    with pytest.raises(SpecError):
        make_score_source("oracle", t)


def test_exact_source_needs_a_mixture_law():
    with pytest.raises(UnsupportedOperationError):
        make_score_source("exact", catalog("two_point"))


# ---------------------------------------------------------------------------
# backward runs


def zero_source(dim=1):
    return ScoreSource(evaluator=lambda t, pts: np.zeros_like(
        np.atleast_2d(pts)), provenance="zero", dim=dim)


def test_single_step_run_matches_closed_form():
    # with score = 0 and N = 1, the run is exactly 2 x0 + sqrt(3) z
    cfg = SamplerConfig(T=math.log(4.0), N=1, ensemble=64, seed=9)
    run = backward_run(cfg, zero_source())
    x0 = _kernels.normal_draws(cfg.seed, STREAM_BACKWARD_INIT, 0, 64, 1)
    z = _kernels.normal_draws(cfg.seed, STREAM_BACKWARD_STEP, 0, 64, 1)
    assert np.array_equal(run.samples, 2.0 * x0 + math.sqrt(3.0) * z)
    assert run.excluded == 0
    assert run.provenance == "zero"


def test_backward_run_is_reproducible_across_threads():
    cfg = SamplerConfig(T=1.0, N=6, ensemble=150_000, seed=21)
    src = make_score_source("exact", catalog("std_normal"))
    serial = backward_run(cfg, src, threads=1)
    threaded = backward_run(cfg, src, threads=4)
    again = backward_run(cfg, src, threads=4)
    assert np.array_equal(serial.samples, threaded.samples)
    assert np.array_equal(threaded.samples, again.samples)


@pytest.mark.parametrize("N,tol", [(10, 0.2), (20, 0.05)])
def test_stationary_law_is_preserved(N, tol):
    # the scheme's per-step variance error is O(dt^2); over the run the
    # fixed point drifts to 1 + dt/2, still inside the stated envelope at
    # these step counts
    cfg = SamplerConfig(T=2.0, N=N, ensemble=40_000, seed=11)
    run = backward_run(cfg, make_score_source("exact", catalog("std_normal")))
    v = float(run.samples.var())
    assert abs(v - 1.0) <= max(3.0 / math.sqrt(cfg.ensemble),
                               5.0 * (cfg.T / N) ** 2)
    assert abs(run.samples.mean()) <= 5.0 / math.sqrt(cfg.ensemble)
    a = (2.0 - math.exp(cfg.dt / 2.0)) ** 2
    b = math.expm1(cfg.dt)
    predicted = 1.0
    for _ in range(N):
        predicted = a * predicted + b
    se = predicted * math.sqrt(2.0 / (cfg.ensemble - 1))
    assert abs(v - predicted) <= 4.0 * se


def test_non_finite_trajectories_are_excluded_not_kept():
    def patchy(t, pts):
        pts = np.atleast_2d(pts)
        out = -pts.copy()
        out[np.abs(pts[:, 0]) > 1.2] = np.nan
        return out

    cfg = SamplerConfig(T=1.0, N=5, ensemble=2000, seed=4)
    run = backward_run(cfg, ScoreSource(patchy, "patchy", 1))
    assert run.excluded == 969
    assert run.samples.shape[0] + run.excluded == cfg.ensemble
    assert np.isfinite(run.samples).all()


def test_early_stopped_run_never_evaluates_below_delta():
    seen = []

    def recording(t, pts):
        seen.append(t)
        return np.zeros_like(np.atleast_2d(pts))

    cfg = SamplerConfig(T=1.0, N=4, delta=0.2, ensemble=8, seed=0)
    backward_run(cfg, ScoreSource(recording, "recording", 1))
    assert seen == pytest.approx([1.0, 0.8, 0.6, 0.4])
    assert min(seen) > cfg.delta


def test_backward_run_2d_shapes():
    cfg = SamplerConfig(T=1.5, N=3, ensemble=100, seed=2)
    src = make_score_source("exact", catalog("std_normal", dim=2))
    run = backward_run(cfg, src)
    assert run.samples.shape == (100, 2)
    assert run.cfg is cfg
