import numpy as np
import pytest
from scipy.integrate import solve_ivp

from critlab.errors import ArgumentError, IntegrationError
from critlab.odeint import dopri5


def oscillator(t, y):
    return np.array([y[1], -y[0] - 0.1 * y[1]])


class TestDopri5:
    def test_exponential_decay(self):
        t = np.linspace(0, 3, 31)
        res = dopri5(lambda t, y: -2 * y, (0, 3), [1.0], t, rtol=1e-8, atol=1e-10)
        assert np.allclose(res.y[:, 0], np.exp(-2 * t), rtol=1e-6)
        assert np.array_equal(res.t, t)

    def test_matches_scipy_rk45(self):
        t = np.linspace(0, 10, 101)
        ours = dopri5(oscillator, (0, 10), [1.0, 0.0], t, rtol=1e-4, atol=1e-6)
        ref = solve_ivp(oscillator, (0, 10), [1.0, 0.0], t_eval=t, rtol=1e-4, atol=1e-6, method="RK45")
        assert np.max(np.abs(ours.y - ref.y.T)) < 1e-3
        # same controller recipe -> similar step counts
        assert abs(ours.n_fev - ref.nfev) <= 0.2 * ref.nfev

    def test_dense_output_order(self):
        t = np.linspace(0, 10, 1001)
        res = dopri5(oscillator, (0, 10), [1.0, 0.0], t, rtol=1e-10, atol=1e-12)
        fine = solve_ivp(oscillator, (0, 10), [1.0, 0.0], t_eval=t, rtol=1e-12, atol=1e-14, method="DOP853")
        assert np.max(np.abs(res.y - fine.y.T)) < 1e-8

    def test_callback_order(self):
        seen = []
        t = [0.0, 0.5, 1.0]
        dopri5(lambda t, y: y, (0, 1), [1.0], t, on_output=lambda tt, y: seen.append(tt))
        assert seen == t

    def test_step_underflow_keeps_partial(self):
        def blowup(t, y):
            return y ** 2

        with pytest.raises(IntegrationError) as exc:
            dopri5(blowup, (0, 2), [1.0], np.linspace(0, 2, 21), rtol=1e-6, atol=1e-8)
        part = exc.value.partial
        # exact solution 1/(1-t) blows up at t = 1
        assert len(part.t) > 0 and part.t[-1] <= 1.0
        ok = part.t < 0.95
        assert np.allclose(part.y[ok, 0], 1 / (1 - part.t[ok]), rtol=1e-4)

    def test_bad_grid(self):
        with pytest.raises(ArgumentError):
            dopri5(lambda t, y: y, (0, 1), [1.0], [0.5, 0.2])
        with pytest.raises(ArgumentError):
            dopri5(lambda t, y: y, (0, 1), [1.0], [0.0, 2.0])
