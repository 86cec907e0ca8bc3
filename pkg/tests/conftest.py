import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_city():
    from georank.synthetic import generate_city

    return generate_city(n_pois=400, n_qa=25, seed=11)


@pytest.fixture(scope="session")
def small_corpus(small_city):
    from georank.synthetic import build_corpus

    return build_corpus(small_city)


@pytest.fixture(scope="session")
def small_pairs(small_city, small_corpus):
    from georank.corpus import qa_from_dict

    return [qa_from_dict(q, small_corpus) for q in small_city.qa]
