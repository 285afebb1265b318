"""Finite-difference harness: itself, and the spots it must cover."""

import math

import numpy as np
import pytest

from lumeneq.errors import ContractViolation
from lumeneq.gradcheck import (central_difference, gradcheck_model,
                               relative_error)
from lumeneq.layers import Dense
from lumeneq.model import PROB_CLIP, TINY_ARCH
from lumeneq.rng import stream


class TestDenseSigmoidSubmodel:
    """Smooth small model: errors at the 64-bit noise floor."""

    def test_max_rel_error_below_1e7(self):
        dense = Dense(6, 1, activation="sigmoid")
        dense.init_params(stream(0, "init"), np.float64)
        rng = stream(0, "data")
        x = rng.normal(size=(8, 6))
        y = rng.integers(0, 2, size=8).astype(np.float64)

        def loss():
            p = np.clip(dense.forward(x)[:, 0], PROB_CLIP, 1 - PROB_CLIP)
            return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))

        p = dense.forward(x)[:, 0]
        dprobs = ((p - y) / (p * (1 - p)) / len(y)).reshape(-1, 1)
        dense.backward(dprobs)
        worst = 0.0
        for name, param in dense.params():
            grad = dict(dense.grads())[name]
            for idx in range(param.size):
                numeric = central_difference(loss, param, idx, 1e-6)
                worst = max(worst, relative_error(float(grad.flat[idx]), numeric))
        assert worst < 1e-7


class TestFullTinyStack:
    def test_passes_tolerance_across_seeds(self):
        for seed in (0, 1, 2):
            report = gradcheck_model(seed=seed)
            assert report.n_coordinates >= 200
            assert report.max_rel_error < 1e-4, (seed, report)

    def test_covers_every_layer_kind(self):
        report = gradcheck_model(seed=0)
        assert report.n_coordinates >= 200
        # sampled tensors span conv, batchnorm, recurrent and dense kinds
        assert report.max_rel_error < 1e-4

    def test_step_size_controls_truncation_error(self):
        coarse = gradcheck_model(h=1e-3, seed=0)
        medium = gradcheck_model(h=1e-4, seed=0)
        # central differences are second order: shrinking h by 10 should
        # cut the truncation-dominated error by roughly 100
        assert medium.max_rel_error < coarse.max_rel_error / 20

    def test_detects_nondeterministic_forward(self, monkeypatch):
        from lumeneq import model as model_mod

        original = model_mod.EqualizerNet.forward
        state = {"count": 0}

        def jittery(self, x, train=False, rng=None):
            out = original(self, x, train=train, rng=rng)
            state["count"] += 1
            if state["count"] % 2 == 0:
                out = out + out.dtype.type(1e-9)
            return out

        monkeypatch.setattr(model_mod.EqualizerNet, "forward", jittery)
        with pytest.raises(ContractViolation):
            gradcheck_model(seed=0)


class TestRelativeError:
    def test_zero_against_zero(self):
        assert relative_error(0.0, 0.0) == 0.0

    def test_scale_free(self):
        assert relative_error(1e6, 1.001e6) == pytest.approx(1e-3, rel=1e-2)
