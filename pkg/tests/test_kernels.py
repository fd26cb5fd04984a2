import importlib
import sys

import numpy as np
import pytest

import tvsmas
from tvsmas import _kernels_py, kernels

needs_compiled = pytest.mark.skipif(not kernels.COMPILED_AVAILABLE, reason="extension not built")


@pytest.fixture
def restore_backend():
    prev = kernels.backend()
    yield
    kernels.use_backend(prev)


def test_reference_coupling_two_agents():
    w = np.array([[0.0, 2.0], [2.0, 0.0]])
    s = np.array([[[4.0], [0.0]]])
    out = _kernels_py.coupling_sum(w, s, 1.0, 1.0, 1.0, 0.5, 2.0, 1, 0.0)
    # 2 * (-(2 + 16 + 1))
    np.testing.assert_allclose(out[0, :, 0], [-38.0, 38.0])
    lin = _kernels_py.coupling_sum(w, s, 0.0, 0.0, 1.0, 0.5, 2.0, 0, 0.0)
    np.testing.assert_allclose(lin[0, :, 0], [-8.0, 8.0])
    bl = _kernels_py.coupling_sum(w, s, 0.0, 0.0, 1.0, 0.5, 2.0, 1, 8.0)
    np.testing.assert_allclose(bl[0, :, 0], [-1.0, 1.0])


def test_reference_max_pair_excess():
    v = np.array([[0.0], [3.0], [1.0]])
    x = np.array([[0.0], [1.0], [5.0]])
    assert _kernels_py.max_pair_excess(v, x, 1.0) == 2.0
    assert _kernels_py.max_pair_excess(v[:1], x[:1], 1.0) == -np.inf
    assert _kernels_py.max_pair_excess(v, x, 1.0, chunk=1) == 2.0


@needs_compiled
@pytest.mark.parametrize("third,eps", [(0, 0.0), (1, 0.0), (1, 0.05)])
def test_backends_agree_coupling(third, eps, restore_backend):
    rng = np.random.default_rng(11)
    w = rng.uniform(0, 2, (7, 7)) * (rng.uniform(size=(7, 7)) < 0.5)
    np.fill_diagonal(w, 0)
    s = rng.normal(size=(4, 7, 3))
    s[:, 2] = s[:, 3]  # exact ties exercise sign(0)
    outs = []
    for name in ("python", "compiled"):
        kernels.use_backend(name)
        outs.append(kernels.coupling_sum(w, s, 0.5, 0.7, 3.0, 0.8, 1.2, third, eps))
    np.testing.assert_allclose(outs[0], outs[1], rtol=1e-12, atol=1e-12)


@needs_compiled
def test_backends_agree_max_pair_excess(restore_backend):
    rng = np.random.default_rng(12)
    v, x = rng.normal(size=(300, 2)), rng.normal(size=(300, 2))
    got = []
    for name in ("python", "compiled"):
        kernels.use_backend(name)
        got.append(kernels.max_pair_excess(v, x, 0.3))
    assert got[0] == pytest.approx(got[1], rel=1e-12)


def test_use_backend_validation(restore_backend):
    assert kernels.use_backend("python") in ("python", "compiled")
    assert kernels.backend() == "python"
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def test_fallback_selected_without_extension(monkeypatch):
    monkeypatch.setitem(sys.modules, "tvsmas._kernels", None)
    monkeypatch.delattr(tvsmas, "_kernels", raising=False)
    mod = importlib.reload(kernels)
    try:
        assert not mod.COMPILED_AVAILABLE and mod.backend() == "python"
        with pytest.raises(RuntimeError):
            mod.use_backend("compiled")
        w = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert mod.coupling_sum(w, np.array([[[1.0], [0.0]]]), 0, 0, 1, 0.5, 2, 0)[0, 0, 0] == -1.0
    finally:
        monkeypatch.undo()
        importlib.reload(kernels)


@needs_compiled
def test_compiled_is_default():
    assert kernels.backend() == "compiled"
