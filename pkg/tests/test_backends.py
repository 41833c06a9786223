import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fracspec._accel import USE_NUMBA, backend

PROBE = Path(__file__).with_name("backend_probe.py")


def probe(disable: str):
    env = dict(os.environ, FRACSPEC_DISABLE_NUMBA=disable)
    proc = subprocess.run([sys.executable, str(PROBE)], capture_output=True, text=True,
                          env=env, timeout=600)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout)


@pytest.fixture(scope="module")
def both():
    return probe("0"), probe("1")


def test_flag_selects_backend(both):
    fast, slow = both
    assert slow["backend"] == "numpy"
    assert fast["backend"] in ("numba", "numpy")
    assert backend() == ("numba" if USE_NUMBA else "numpy")


def _close(a, b, tol):
    a, b = np.asarray(a), np.asarray(b)
    scale = np.maximum(1.0, np.abs(b))
    assert np.max(np.abs(a - b) / scale) <= tol


def test_mittag_leffler_agrees(both):
    fast, slow = both
    for key in fast["ml"]:
        _close(fast["ml"][key], slow["ml"][key], 1e-13)


def test_convolutions_agree(both):
    fast, slow = both
    _close(fast["toeplitz"], slow["toeplitz"], 1e-13)
    _close(fast["triangular"], slow["triangular"], 1e-13)


def test_solutions_agree(both):
    fast, slow = both
    _close(fast["solve"], slow["solve"], 1e-13)
    _close(fast["solve_d1"], slow["solve_d1"], 1e-12)
