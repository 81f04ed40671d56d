from dataclasses import replace

import numpy as np
import pytest

from gekf_esc import kernels
from gekf_esc.esc import EscParams
from gekf_esc.sim import Scenario, run_scenario

needs_ext = pytest.mark.skipif(not kernels.compiled_available(), reason="compiled kernel not built")

GAUSS = {"kind": "gaussian", "peak": 10.0, "center": [1.0, 1.0], "width": 1.5}
INV = {"kind": "inverse-square", "peak": 10.0, "center": [1.0, 1.0], "width": 0.5}


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
    assert kernels.get_backend("python").BACKEND == "python"


@needs_ext
@pytest.mark.parametrize("case", [
    dict(),
    dict(noise_std=0.05, seed=7),
    dict(measurement_cadence="t_out"),
    dict(field=GAUSS),
    dict(field=INV),
    dict(esc=EscParams(h1=1.0, h2=1.0, filter_kind="lowpass")),
    dict(esc=EscParams(h1=1.0, h2=1.0, filter_target="j-signal")),
    dict(esc=EscParams(variant="baseline-constant")),
])
def test_backends_agree(case):
    sc = Scenario(**{"duration": 5.0, "esc": EscParams(h1=1.0, h2=1.0), **case})
    a = run_scenario(sc, backend="python")
    b = run_scenario(sc, backend="cython")
    assert a.metadata["backend"] == "python" and b.metadata["backend"] == "cython"
    np.testing.assert_allclose(a.data, b.data, rtol=0, atol=1e-12)
