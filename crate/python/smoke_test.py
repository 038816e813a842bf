"""Smoke test for the osfield_py extension.

Builds the extension with cargo when it is not importable, then exercises
the main entry points. Run from anywhere: ``python3 python/smoke_test.py``.
"""

import importlib.util
import math
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load():
    try:
        import osfield_py

        return osfield_py
    except ImportError:
        pass
    lib = os.environ.get("OSFIELD_PY_LIB")
    if not lib:
        subprocess.run(
            ["cargo", "build", "--release", "-p", "osfield-python", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
        lib = os.path.join(ROOT, "target", "release", "libosfield_py.so")
    tmp = tempfile.mkdtemp()
    dest = os.path.join(tmp, "osfield_py.so")
    shutil.copy(lib, dest)
    spec = importlib.util.spec_from_file_location("osfield_py", dest)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def close(a, b, rel):
    return abs(a - b) <= rel * abs(b)


def main():
    of = load()

    e = of.Exponent.diagonal([2.0])
    m = of.Model(e)
    for h in [1e-3, 0.1, 1.0, 10.0]:
        g = m.variogram([h])
        assert close(g, 8 * math.pi * h, 1e-3), (h, g)
        assert close(m.comparability_ratio([h]), 16 * math.pi, 5e-3)

    e2 = of.Exponent.diagonal([1.5, 2.5])
    x = [0.3, -0.7]
    for r in [0.1, 2.0, 7.5]:
        y = e2.apply_power(r, x)
        assert close(e2.tau(y), r * e2.tau(x), 1e-7)
    assert e2.tau(x) == e2.tau([-v for v in x])
    assert e2.polar([0.0, 0.0]) == (0.0, None)
    assert close(e2.trace, 4.0, 1e-15)

    cell = of.Exponent.from_json('{"blocks": [{"kind": "cell", "a": 2.0, "size": 2}]}')
    assert close(cell.e_norm([0.0, 0.6]), 0.3, 1e-9)
    assert close(cell.tau([0.0, 2 * 0.5**2]), 0.5, 1e-7)

    m2 = of.Model(e2)
    pts = of.dyadic_grid(2, 2)
    assert len(pts) == 16 and pts[0] == [0.0, 0.0]
    a = of.sample_cholesky(m2, pts, 5)
    b = of.sample_cholesky(m2, pts, 5)
    assert a == b and a[0] == 0.0
    s = of.sample_spectral(m2, pts, 5, freq_count=1024)
    assert len(s) == 16 and s[0] == 0.0
    reps = of.replicate_cholesky(m2, pts, 3, 5)
    assert reps[0] == a

    d = of.dimensions([1 / 3, 0.5], 2)
    assert abs(d["graph_dim"] - 10 / 3) < 1e-12
    assert abs(d["level_set_dim"] - 4 / 3) < 1e-12
    assert of.dimensions([0.5, 0.5], 4)["level_set_status"] == "indeterminate"

    assert close(50 / of.alpha_theta(2.0, 50.0), 2.0, 0.05)
    t0, a0 = of.alpha_argmin(2.0)
    assert a0 > 0.5 and -20 < t0 < 20

    rep = of.scaling_check(m2, 7, lags=5)
    assert rep["pass"], rep["max_rel_err"]
    assert of.slnd_ratio(m2, [[0.2, 0.3], [0.6, 0.1]]) > 0

    try:
        of.Exponent.diagonal([0.5])
    except ValueError:
        pass
    else:
        raise AssertionError("exponent with a <= 1 accepted")

    print("osfield_py smoke test: ok")


if __name__ == "__main__":
    sys.exit(main())
