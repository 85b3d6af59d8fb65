import numpy as np
import pytest

from domsplit import Mat2C


def random_mat(rng: np.random.Generator, scale: float = 1.0) -> Mat2C:
    g = rng.standard_normal(8)
    return Mat2C(
        scale * complex(g[0], g[1]),
        scale * complex(g[2], g[3]),
        scale * complex(g[4], g[5]),
        scale * complex(g[6], g[7]),
    )


def random_unit_vector(rng: np.random.Generator) -> tuple[complex, complex]:
    g = rng.standard_normal(4)
    v = (complex(g[0], g[1]), complex(g[2], g[3]))
    n = abs(complex(abs(v[0]), abs(v[1])))
    return (v[0] / n, v[1] / n)


def to_numpy(m: Mat2C) -> np.ndarray:
    return np.array([[m.a, m.b], [m.c, m.d]], dtype=complex)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20250811)
