"""Compiled vs pure kernel agreement and a direct finite-difference check."""

import numpy as np
import pytest

from dirfilt.nn import backend, kernels_py

compiled = pytest.importorskip("dirfilt.nn._kernels")


def _random_case(nb=3, steps=7, hid=5, seed=0):
    rng = np.random.default_rng(seed)
    xw = rng.standard_normal((nb, steps, 4 * hid))
    u = rng.standard_normal((hid, 4 * hid)) * 0.4
    h0 = rng.standard_normal((nb, hid)) * 0.3
    c0 = rng.standard_normal((nb, hid)) * 0.3
    return xw, u, h0, c0


class TestBackendParity:
    def test_compiled_flag(self):
        assert compiled.COMPILED is True
        assert kernels_py.COMPILED is False

    def test_forward_agrees(self):
        xw, u, h0, c0 = _random_case()
        h_a, c_a, g_a = compiled.lstm_seq_forward(xw, u, h0, c0)
        h_b, c_b, g_b = kernels_py.lstm_seq_forward(xw, u, h0, c0)
        np.testing.assert_allclose(h_a, h_b, rtol=0, atol=1e-13)
        np.testing.assert_allclose(c_a, c_b, rtol=0, atol=1e-13)
        np.testing.assert_allclose(g_a, g_b, rtol=0, atol=1e-13)

    def test_backward_agrees(self):
        xw, u, h0, c0 = _random_case(seed=1)
        h, c, gates = kernels_py.lstm_seq_forward(xw, u, h0, c0)
        rng = np.random.default_rng(2)
        dh_out = rng.standard_normal(h.shape)
        outs_a = compiled.lstm_seq_backward(dh_out, u, h0, c0, h, c, gates)
        outs_b = kernels_py.lstm_seq_backward(dh_out, u, h0, c0, h, c, gates)
        for a, b in zip(outs_a, outs_b):
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)

    def test_active_backend_is_one_of_them(self):
        assert backend.backend_name() in ("compiled", "pure-python")
        assert backend.lstm_seq_forward in (compiled.lstm_seq_forward, kernels_py.lstm_seq_forward)


class TestKernelGradients:
    """Central-difference check of the recurrence backward, no model on top."""

    def _loss_and_grads(self, xw, u, h0, c0, w):
        h, c, gates = backend.lstm_seq_forward(xw, u, h0, c0)
        loss = float(np.sum(h * w))
        dxw, du, dh0, dc0 = backend.lstm_seq_backward(w.copy(), u, h0, c0, h, c, gates)
        return loss, {"xw": dxw, "u": du, "h0": dh0, "c0": dc0}

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        xw, u, h0, c0 = _random_case(nb=2, steps=5, hid=4, seed=4)
        arrays = {"xw": xw, "u": u, "h0": h0, "c0": c0}
        w = rng.standard_normal((2, 5, 4))
        _, grads = self._loss_and_grads(xw, u, h0, c0, w)
        step = 1e-6
        worst = 0.0
        for name, arr in arrays.items():
            flat = arr.reshape(-1)
            for idx in rng.choice(flat.size, size=6, replace=False):
                orig = flat[idx]
                flat[idx] = orig + step
                up, _ = self._loss_and_grads(xw, u, h0, c0, w)
                flat[idx] = orig - step
                dn, _ = self._loss_and_grads(xw, u, h0, c0, w)
                flat[idx] = orig
                fd = (up - dn) / (2 * step)
                an = grads[name].reshape(-1)[idx]
                rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
                worst = max(worst, rel)
        assert worst <= 1e-7
