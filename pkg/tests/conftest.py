import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=75,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_network(rng, input_dim=None, hidden=None, classes=None,
                   gradient_target="probability"):
    """Small random network for gradient/attribution checks."""
    from fadkit import nncore

    input_dim = input_dim or int(rng.integers(2, 7))
    classes = classes or int(rng.integers(2, 5))
    if hidden is None:
        hidden = tuple(
            int(rng.integers(2, 33)) for _ in range(int(rng.integers(0, 4)))
        )
    return nncore.init_network(input_dim, hidden, classes,
                               seed=int(rng.integers(0, 2**31)),
                               gradient_target=gradient_target)
