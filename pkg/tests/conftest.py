"""Pytest fixtures; oracle helpers live in oracles.py."""

import pytest

from lrperc.kernel import KernelSpec


@pytest.fixture(scope="session")
def tiny_spec() -> KernelSpec:
    return KernelSpec(d=1, alpha=0.6, amplitude=1.0)
