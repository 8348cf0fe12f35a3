import os
import subprocess
import sys

import numpy as np
import pytest

from rfsep import _kernels_numpy as knp
from rfsep.rng import CounterRng

numba_missing = False
try:
    from rfsep import _kernels_numba as knb
except ImportError:  # pragma: no cover
    numba_missing = True


def _case(seed, C=5, T=64, k=3, d=1.7):
    rng = CounterRng(seed)
    half = (k - 1) // 2
    pad = int(np.ceil(half * d)) + 1
    off = (np.arange(k) - half) * d
    shift = np.floor(off).astype(np.int64) + pad
    frac = off - np.floor(off)
    shift_left = (np.ceil(off) - 1.0).astype(np.int64) + pad
    taps = (np.arange(k) - half).astype(np.float64)
    xpad = np.zeros((C, T + 2 * pad))
    xpad[:, pad:pad + T] = rng.normal(C * T).reshape(C, T)
    gxhat = rng.normal(C * k * T).reshape(C * k, T)
    return xpad, shift, frac, shift_left, taps, gxhat, T


@pytest.mark.skipif(numba_missing, reason="numba not installed")
class TestBackendParity:
    @pytest.mark.parametrize("seed", range(6))
    def test_gather_identical(self, seed):
        xpad, shift, frac, _, _, _, T = _case(seed, d=1.3 + 0.3 * seed)
        np.testing.assert_array_equal(
            knb.frac_gather(xpad, shift, frac, T),
            knp.frac_gather(xpad, shift, frac, T))

    @pytest.mark.parametrize("seed", range(6))
    def test_scatter_close(self, seed):
        xpad, shift, frac, _, _, gxhat, T = _case(seed, d=1.2 + 0.4 * seed)
        a = knb.frac_scatter(gxhat, shift, frac, xpad.shape[1])
        b = knp.frac_scatter(gxhat, shift, frac, xpad.shape[1])
        np.testing.assert_allclose(a, b, atol=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_dilation_grad_close(self, seed):
        xpad, _, _, shift_left, taps, gxhat, T = _case(seed, d=1.4 + 0.2 * seed)
        a = knb.frac_dilation_grad(gxhat, xpad, shift_left, taps)
        b = knp.frac_dilation_grad(gxhat, xpad, shift_left, taps)
        assert a == pytest.approx(b, rel=1e-12)


def _backend_of(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("RFSEP_BACKEND", None)
    else:
        env["RFSEP_BACKEND"] = env_value
    proc = subprocess.run(
        [sys.executable, "-c", "import rfsep; print(rfsep.BACKEND_NAME)"],
        capture_output=True, text=True, env=env)
    return proc.returncode, proc.stdout.strip(), proc.stderr


def test_env_flag_selects_numpy():
    code, name, err = _backend_of("numpy")
    assert code == 0 and name == "numpy", err


@pytest.mark.skipif(numba_missing, reason="numba not installed")
def test_env_flag_selects_numba():
    code, name, err = _backend_of("numba")
    assert code == 0 and name == "numba", err


def test_env_flag_rejects_unknown():
    code, _, err = _backend_of("fortran")
    assert code != 0 and "fortran" in err


def test_numpy_backend_runs_the_model():
    code, out, err = 0, "", ""
    proc = subprocess.run(
        [sys.executable, "-c", (
            "import numpy as np\n"
            "from rfsep.wavenet import WaveNetConfig, wavenet_init\n"
            "from rfsep.autodiff import Tensor, backward, mse_loss\n"
            "cfg = WaveNetConfig(residual_channels=4, skip_channels=4, num_blocks=2)\n"
            "m = wavenet_init(cfg, seed=1)\n"
            "x = Tensor(np.linspace(-1, 1, 2 * 64).reshape(2, 64))\n"
            "loss = mse_loss(m.forward(x), Tensor(np.zeros((2, 64))))\n"
            "backward(loss)\n"
            "print('%.17g' % loss.item())\n")],
        capture_output=True, text=True,
        env={**os.environ, "RFSEP_BACKEND": "numpy"})
    assert proc.returncode == 0, proc.stderr
    assert float(proc.stdout) > 0
