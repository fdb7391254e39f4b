"""Shared fixtures: the bundled miniature dataset, loaded fresh per test."""

from __future__ import annotations

import pytest
from hypothesis import settings

from factlink.session import Session, bundled_data_dir, bundled_knowledge_file, load_system

settings.register_profile("deterministic", derandomize=True, max_examples=50)
settings.load_profile("deterministic")


@pytest.fixture()
def system():
    return load_system(bundled_data_dir(), bundled_knowledge_file())


@pytest.fixture()
def kb(system):
    return system.kb


@pytest.fixture()
def store(system):
    return system.store


@pytest.fixture()
def gateway(system):
    return system.gateway


@pytest.fixture()
def session():
    s = Session()
    s.load(bundled_data_dir(), bundled_knowledge_file())
    return s
