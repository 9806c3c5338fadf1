import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomsphere import _kernels_py, kernels
from atomsphere.io import csv_text, fmt, json_text, write_csv, write_json
from atomsphere.parallel import chunked, ordered_map

from conftest import approx

try:
    from atomsphere import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")
BACKENDS = [_kernels_py] + ([compiled] if compiled is not None else [])


@pytest.mark.parametrize("impl", BACKENDS)
def test_numerov_free_wave(impl):
    # ψ'' = −k²ψ from ψ(0) = 0 is sin(kr); Numerov's error is O(h⁴)
    k, n = 3.0, 4001
    r = np.linspace(0.0, 10.0, n)
    h = r[1] - r[0]
    q = np.full(n, k * k)
    psi = impl.numerov_wave(q, h, 0.0, math.sin(k * h))
    assert np.max(np.abs(psi - np.sin(k * r))) < 1e-8


@pytest.mark.parametrize("impl", BACKENDS)
def test_numerov_renormalization_keeps_shape(impl):
    # exponential growth past the rescale threshold: ratio ψ(i+1)/ψ(i) stays e^{κh}
    kappa, n = 1.0, 2001
    h = 0.5
    q = np.full(n, -kappa**2)
    psi = impl.numerov_wave(q, h, 1.0, math.exp(kappa * h))
    assert np.all(np.isfinite(psi)) and np.all(psi > 0)
    ratio = psi[-1] / psi[-2]
    assert ratio == approx(math.exp(kappa * h), rel=1e-3)


@pytest.mark.parametrize("impl", BACKENDS)
def test_numerov_node_count(impl):
    # sin(kr) on [0, L] has floor(kL/π) interior zeros
    n, L = 5001, 10.0
    h = L / (n - 1)
    ks = np.array([0.5, 1.0, 2.0, 3.3, 7.7])
    q = np.repeat((ks**2)[:, None], n, axis=1)
    nodes = impl.numerov_nodes(q, h)
    assert list(nodes) == [int(k * L // math.pi) for k in ks]


@pytest.mark.parametrize("impl", BACKENDS)
def test_logderiv_free_particle(impl):
    # y = ψ'/ψ for ψ = sin(kr) is k·cot(kr); l = 0, no potential
    k, r0, r1, n = 2.0, 0.3, 0.7, 400
    h = (r1 - r0) / n
    y0 = np.array([k / math.tan(k * r0)])
    y, nodes = impl.logderiv_propagate(np.zeros(n + 1), r0, h, np.array([k * k]),
                                       np.array([0.0]), y0)
    assert y[0] == approx(k / math.tan(k * r1), rel=1e-7)
    assert nodes[0] == 0


@pytest.mark.parametrize("impl", BACKENDS)
def test_logderiv_counts_nodes(impl):
    k, r0, r1, n = 2.0, 0.3, 5.0, 4000
    h = (r1 - r0) / n
    y, nodes = impl.logderiv_propagate(np.zeros(n + 1), r0, h, np.array([k * k]),
                                       np.array([0.0]), np.array([k / math.tan(k * r0)]))
    assert nodes[0] == int(k * r1 // math.pi) - int(k * r0 // math.pi)
    assert y[0] == approx(k / math.tan(k * r1), rel=1e-5)


def test_logderiv_odd_steps_rejected():
    with pytest.raises(ValueError):
        _kernels_py.logderiv_propagate(np.zeros(4), 1.0, 0.1, np.array([1.0]), np.array([0.0]),
                                       np.array([0.0]))


@needs_compiled
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_compiled_matches_fallback(seed):
    rng = np.random.default_rng(seed)
    n = 2 * int(rng.integers(50, 400)) + 1
    h = float(rng.uniform(1e-3, 1e-2))
    q = rng.uniform(-5.0, 50.0, n)
    a = _kernels_py.numerov_wave(q, h, 0.0, 1e-6)
    b = compiled.numerov_wave(q, h, 0.0, 1e-6)
    assert np.allclose(a, b, rtol=1e-12, atol=0.0)
    qb = rng.uniform(-5.0, 50.0, (4, n))
    assert list(_kernels_py.numerov_nodes(qb, h)) == list(compiled.numerov_nodes(qb, h))
    k2 = rng.uniform(0.1, 10.0, 3)
    ll = np.array([0.0, 2.0, 12.0])
    y0 = rng.uniform(-1.0, 1.0, 3) + 1e3
    vq = rng.uniform(-2.0, 2.0, n)
    ya, na = _kernels_py.logderiv_propagate(vq, 1.0, h, k2, ll, y0)
    yb, nb = compiled.logderiv_propagate(vq, 1.0, h, k2, ll, y0)
    assert np.allclose(ya, yb, rtol=1e-10, atol=0.0)
    assert list(na) == list(nb)


def test_backend_selection():
    assert kernels.BACKEND == ("compiled" if compiled is not None else "python")
    code = "import atomsphere.kernels as k; print(k.BACKEND)"
    env_out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                             env={"ATOMSPHERE_PURE_PYTHON": "1", "PATH": ""}, check=True)
    assert env_out.stdout.strip() == "python"


def test_fallback_when_extension_missing():
    # a meta-path hook hides the extension, as on an install without a compiler
    code = (
        "import sys, importlib.abc\n"
        "class Block(importlib.abc.MetaPathFinder):\n"
        "    def find_spec(self, name, path, target=None):\n"
        "        if name == 'atomsphere._kernels':\n"
        "            raise ImportError('blocked')\n"
        "sys.meta_path.insert(0, Block())\n"
        "import atomsphere.kernels as k\n"
        "print(k.BACKEND)\n"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_fmt():
    assert fmt(1.0) == "1.00000000e+00"
    assert fmt(-123456789.0) == "-1.23456789e+08"
    assert fmt(np.float64(0.5)) == "5.00000000e-01"
    assert fmt(3) == "3" and fmt(np.int64(4)) == "4"
    assert fmt(True) == "true" and fmt(np.bool_(False)) == "false"
    assert (fmt(float("nan")), fmt(float("inf")), fmt(-float("inf"))) == ("nan", "inf", "-inf")
    assert fmt("none found") == "none found"


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_nine_significant_digits(x):
    assert float(fmt(x)) == approx(x, rel=5e-9, abs=0.0)


def test_csv_and_json_writers(tmp_path):
    text = csv_text(["a", "b"], [[1.5, 2], [np.float64(3.0), "x"]])
    assert text == "a,b\n1.50000000e+00,2\n3.00000000e+00,x\n"
    p = write_csv(tmp_path / "sub" / "t.csv", ["a"], [[1.0]])
    assert p.read_bytes() == b"a\n1.00000000e+00\n"
    data = {"b": np.arange(3), "a": np.float64(2.0), "p": tmp_path}
    q = write_json(tmp_path / "t.json", data)
    assert q.read_text() == json_text(data)
    assert json.loads(q.read_text()) == {"a": 2.0, "b": [0, 1, 2], "p": str(tmp_path)}
    with pytest.raises(TypeError):
        json_text({"x": object()})


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(), max_size=50), st.integers(1, 12))
def test_chunked_partitions_in_order(items, n):
    parts = chunked(items, n)
    assert [x for p in parts for x in p] == items
    if items:
        assert len(parts) == min(n, len(items))
        sizes = [len(p) for p in parts]
        assert max(sizes) - min(sizes) <= 1


@pytest.mark.parametrize("threads", [1, 2, 5])
def test_ordered_map_preserves_order(threads):
    items = list(range(37))
    assert ordered_map(lambda x: x * x, items, threads) == [x * x for x in items]
    assert ordered_map(abs, [], threads) == []
