import pytest

from helperoffload.energy import SystemParams


@pytest.fixture
def params():
    """Reference scenario: D=3000, K=5, Q=300, P11=0.8, P00=0.7, Pgg=0.8, Pbb=0.7."""
    return SystemParams()


def desk(**kw):
    base = dict(D=20, K=3, Q=0)
    base.update(kw)
    return SystemParams().with_(**base)
