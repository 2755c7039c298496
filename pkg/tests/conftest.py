import numpy as np
import pytest
from hypothesis import settings, strategies as st

from ailimit.relation import Branch, RelationCoeffs
from ailimit.symbolic import SymbolWord, TrappingSet

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

HM = RelationCoeffs(-1.0, 0.0, 0.9, 0.1)          # continued example relation
HM_B = TrappingSet.interval(-1.3, 1.3)
TILTED = RelationCoeffs(-1.0, 0.3, 0.9, 0.1)      # same family with r = 0.3, varying slopes
TILTED_B = TrappingSet.interval(-1.6, 1.6)
SQUARE = RelationCoeffs(-1.0, 0.0, 1.0, 0.0)
ZERO_MINUS_ONE = RelationCoeffs(0.0, -1.0, 0.0, 1.0)


def words(min_size=1, max_size=8):
    return st.lists(st.sampled_from([Branch.PLUS, Branch.MINUS]), min_size=min_size,
                    max_size=max_size).map(lambda x: SymbolWord(tuple(x)))


def random_word(rng, n):
    return SymbolWord(tuple(Branch.PLUS if b else Branch.MINUS for b in rng.integers(0, 2, n)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
