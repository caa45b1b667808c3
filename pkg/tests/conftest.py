import random

import numpy as np
import pytest

from homsos.poly import Polynomial, VariableTable, mono_make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_polynomial(rng, nvars=3, max_deg=3, nterms=6,
                      table: VariableTable | None = None):
    """Dense-ish random polynomial with integer-ish coefficients."""
    terms = {}
    for _ in range(nterms):
        deg = int(rng.integers(0, max_deg + 1))
        mono = mono_make(
            (int(rng.integers(0, nvars)), 1) for _ in range(deg))
        terms[mono] = terms.get(mono, 0.0) + float(rng.integers(-5, 6))
    return Polynomial(terms)


def random_point(rng, nvars, scale=1.0):
    return {v: float(rng.normal(scale=scale)) for v in range(nvars)}
