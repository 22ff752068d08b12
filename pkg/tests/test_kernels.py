"""Backend selection and compiled/pure kernel parity.

Integer kernels must agree exactly; the float kernel must agree to the
last bit because both backends perform the same operations in order.
"""

from __future__ import annotations

import math
import random
import subprocess
import sys

import pytest

from ragmark import _kernels
from ragmark._kernels import _pure

try:
    from ragmark._kernels import _speedups
except ImportError:
    _speedups = None

needs_speedups = pytest.mark.skipif(
    _speedups is None, reason="compiled extension not built"
)


def random_text(rng: random.Random, max_len=60) -> str:
    pools = [(0x20, 0x7E), (0xA1, 0x24F), (0x390, 0x3C9), (0x4E00, 0x4E80)]
    n = rng.randint(0, max_len)
    out = []
    for _ in range(n):
        lo, hi = rng.choice(pools)
        out.append(chr(rng.randint(lo, hi)))
    return "".join(out)


# ---------------------------------------------------------------- selection


def test_selected_backend_exports():
    assert _kernels.BACKEND in ("compiled", "python")
    for name in ("gestalt_total", "trigram_accumulate", "range_cdf_inner",
                 "as_grid"):
        assert callable(getattr(_kernels, name))


def test_env_var_forces_pure_backend():
    out = subprocess.run(
        [sys.executable, "-c",
         "from ragmark._kernels import BACKEND; print(BACKEND)"],
        capture_output=True, text=True, check=True,
        env={"PATH": "/usr/bin:/bin", "RAGMARK_PURE_PYTHON": "1"},
    )
    assert out.stdout.strip() == "python"


@needs_speedups
def test_compiled_backend_preferred_when_built():
    out = subprocess.run(
        [sys.executable, "-c",
         "from ragmark._kernels import BACKEND; print(BACKEND)"],
        capture_output=True, text=True, check=True,
        env={"PATH": "/usr/bin:/bin"},
    )
    assert out.stdout.strip() == "compiled"
    assert _kernels.BACKEND == "compiled"


# ---------------------------------------------------------------- parity


@needs_speedups
def test_trigram_accumulate_parity_exact():
    rng = random.Random(801)
    cases = [("", 8, 0), ("ab", 8, 0), ("abc", 1, 0), ("aaaa", 3, 2**63 + 11)]
    for _ in range(200):
        cases.append((
            random_text(rng), rng.randint(1, 97),
            rng.randint(0, (1 << 64) - 1),
        ))
    for text, dim, seed in cases:
        pure = _pure.trigram_accumulate(text, dim, seed)
        fast = _speedups.trigram_accumulate(text, dim, seed)
        assert fast == pure, (text, dim, seed)
        assert len(fast) == dim


@needs_speedups
def test_gestalt_total_parity_exact():
    rng = random.Random(802)
    cases = [("", ""), ("abc", ""), ("abcd", "bcde"), ("same", "same")]
    # a pair whose matched totals differ by operand order: both backends
    # must still agree with each other in each direction
    tricky = ("euXΫΘ&乮乽", "ƼΐP7u丝丝0")
    cases.extend([tricky, tricky[::-1]])
    for _ in range(300):
        cases.append((random_text(rng), random_text(rng)))
    for a, b in cases:
        assert _speedups.gestalt_total(a, b) == _pure.gestalt_total(a, b), (a, b)


@needs_speedups
def test_as_grid_parity():
    values = [0.0, -1.5, 2.25, 1e-300, 8.5]
    assert list(_speedups.as_grid(values)) == _pure.as_grid(values)


@needs_speedups
def test_range_cdf_inner_parity_bit_identical():
    rng = random.Random(803)
    n = 340
    z = [-8.5 + 17.0 * i / (n - 1) for i in range(n)]
    weighted_phi = [
        0.05 * math.exp(-0.5 * zi * zi) / math.sqrt(2.0 * math.pi) for zi in z
    ]
    big_phi = [0.5 * math.erfc(-zi / math.sqrt(2.0)) for zi in z]
    pure_args = tuple(_pure.as_grid(v) for v in (z, weighted_phi, big_phi))
    fast_args = tuple(_speedups.as_grid(v) for v in (z, weighted_phi, big_phi))
    ws = [0.001, 0.3, 1.0, 2.5, 8.0, 17.0] + [rng.uniform(0.01, 10.0) for _ in range(40)]
    for km1 in (1, 2, 3, 5, 9):
        for w in ws:
            pure = _pure.range_cdf_inner(w, km1, *pure_args)
            fast = _speedups.range_cdf_inner(w, km1, *fast_args)
            assert fast == pure, (w, km1)  # bitwise, not approximate
    assert _speedups.range_cdf_inner(0.0, 2, *fast_args) == 0.0
    assert _pure.range_cdf_inner(-1.0, 2, *pure_args) == 0.0


@needs_speedups
def test_pure_mode_reproduces_compiled_results_end_to_end():
    # the same public computations must print identical reprs under the
    # forced pure backend
    snippet = (
        "from ragmark.embeddings import MockEmbeddingProvider\n"
        "from ragmark.metrics.seqmatch import seq_matcher_ratio\n"
        "from ragmark.stats import q_survival\n"
        "vec = MockEmbeddingProvider(dim=32, seed=9).embed_text('kernel parity')\n"
        "print(repr([float(v) for v in vec.values[:4]]))\n"
        "print(repr(seq_matcher_ratio('abcd', 'bcde')))\n"
        "print(repr(q_survival(3.2, 3, 40)))\n"
    )
    runs = {}
    for label, env in (
        ("pure", {"PATH": "/usr/bin:/bin", "RAGMARK_PURE_PYTHON": "1"}),
        ("compiled", {"PATH": "/usr/bin:/bin"}),
    ):
        out = subprocess.run(
            [sys.executable, "-c", snippet],
            capture_output=True, text=True, check=True, env=env,
        )
        runs[label] = out.stdout
    assert runs["pure"] == runs["compiled"]
