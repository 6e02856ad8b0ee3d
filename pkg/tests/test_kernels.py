import numpy as np
import pytest

from chainex import kernels


def _random_case(rng, t=6, b=3, i=5, h=4):
    return dict(
        x=rng.normal(size=(t, b, i)),
        wx=rng.normal(size=(i, 4 * h)) * 0.3,
        wh=rng.normal(size=(h, 4 * h)) * 0.3,
        b=rng.normal(size=4 * h) * 0.1,
        h0=rng.normal(size=(b, h)) * 0.2,
        c0=rng.normal(size=(b, h)) * 0.2,
    )


BACKENDS = kernels.available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.get_backend(request.param)


class TestForward:
    def test_shapes(self, backend):
        case = _random_case(np.random.default_rng(0))
        h, c, gates = backend.lstm_forward(**case)
        assert h.shape == (6, 3, 4) and c.shape == (6, 3, 4) and gates.shape == (6, 3, 16)

    def test_zero_weights_give_zero_hidden(self, backend):
        case = _random_case(np.random.default_rng(1))
        case["wx"] = np.zeros_like(case["wx"])
        case["wh"] = np.zeros_like(case["wh"])
        case["b"] = np.zeros_like(case["b"])
        case["h0"] = np.zeros_like(case["h0"])
        case["c0"] = np.zeros_like(case["c0"])
        h, c, _ = backend.lstm_forward(**case)
        assert np.allclose(h, 0.0) and np.allclose(c, 0.0)

    def test_single_step_matches_cell_equations(self, backend):
        case = _random_case(np.random.default_rng(2), t=1, b=2, i=3, h=2)
        h, c, _ = backend.lstm_forward(**case)
        z = case["x"][0] @ case["wx"] + case["h0"] @ case["wh"] + case["b"]

        def sig(v):
            return 1.0 / (1.0 + np.exp(-v))

        i_g, f_g = sig(z[:, 0:2]), sig(z[:, 2:4])
        g_g, o_g = np.tanh(z[:, 4:6]), sig(z[:, 6:8])
        c_ref = f_g * case["c0"] + i_g * g_g
        assert np.allclose(c[0], c_ref, atol=1e-12)
        assert np.allclose(h[0], o_g * np.tanh(c_ref), atol=1e-12)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
class TestBackendEquivalence:
    def test_forward_and_backward_agree(self):
        rng = np.random.default_rng(3)
        case = _random_case(rng, t=9, b=4, i=6, h=5)
        dh = rng.normal(size=(9, 4, 5))
        results = []
        for name in BACKENDS:
            impl = kernels.get_backend(name)
            h, c, gates = impl.lstm_forward(**case)
            grads = impl.lstm_backward(case["x"], case["wx"], case["wh"], h, c, gates,
                                       case["h0"], case["c0"], dh)
            results.append((h, c, gates, *grads))
        for a, b in zip(results[0], results[1]):
            assert np.allclose(a, b, atol=1e-12)

    def test_set_backend_dispatch(self):
        case = _random_case(np.random.default_rng(4))
        before = kernels.active_backend()
        try:
            outs = []
            for name in BACKENDS:
                kernels.set_backend(name)
                assert kernels.active_backend() == name
                outs.append(kernels.lstm_forward(**case)[0])
            assert np.allclose(outs[0], outs[1], atol=1e-12)
        finally:
            kernels.set_backend(before)

    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError):
            kernels.set_backend("fortran")


class TestBackwardFiniteDifference:
    def test_gradients_match_finite_differences(self, backend):
        rng = np.random.default_rng(5)
        case = _random_case(rng, t=5, b=2, i=4, h=3)
        dh = rng.normal(size=(5, 2, 3))

        def loss(c):
            h, _, _ = backend.lstm_forward(**c)
            return float((h * dh).sum())

        h, c, gates = backend.lstm_forward(**case)
        dx, dwx, dwh, db, dh0, dc0 = backend.lstm_backward(
            case["x"], case["wx"], case["wh"], h, c, gates, case["h0"], case["c0"], dh)
        analytic = {"x": dx, "wx": dwx, "wh": dwh, "b": db, "h0": dh0, "c0": dc0}
        eps = 1e-6
        for name, grad in analytic.items():
            arr = case[name]
            for _ in range(6):
                idx = int(rng.integers(arr.size))
                perturbed = {k: v.copy() for k, v in case.items()}
                perturbed[name].flat[idx] += eps
                plus = loss(perturbed)
                perturbed[name].flat[idx] -= 2 * eps
                minus = loss(perturbed)
                fd = (plus - minus) / (2 * eps)
                assert abs(fd - grad.flat[idx]) < 1e-7 * max(1.0, abs(fd)), name
