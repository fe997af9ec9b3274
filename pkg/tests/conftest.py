import pytest

from henonlab.core_map import make_henon
from henonlab.manifold import normalize_chart, solve_chart
from henonlab.periodic import find_saddles

# the two workhorse examples: a small perturbation of y^2 (connected J)
# and a horseshoe (disconnected J)
MAP_A = [((0j, 0j), 0.3 + 0j)]
MAP_B = [((-6 + 0j, 0j), 0.3 + 0j)]


@pytest.fixture(scope="session")
def map_a():
    return make_henon(MAP_A)


@pytest.fixture(scope="session")
def map_b():
    return make_henon(MAP_B)


@pytest.fixture(scope="session")
def saddle_a(map_a):
    return find_saddles(map_a, 1, box=5.0)[0]


@pytest.fixture(scope="session")
def chart_a(map_a, saddle_a):
    return normalize_chart(solve_chart(map_a, saddle_a, n_series=60))


@pytest.fixture(scope="session")
def saddle_b(map_b):
    return find_saddles(map_b, 1, box=5.0)[0]


@pytest.fixture(scope="session")
def chart_b(map_b, saddle_b):
    return normalize_chart(solve_chart(map_b, saddle_b, n_series=60))
