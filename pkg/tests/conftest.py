import numpy as np
import pytest

# one human-readable verdict line per acceptance criterion, shown in the
# terminal summary regardless of output capture
acceptance_lines: list = []


def record_criterion(line: str) -> None:
    acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


from bsmpm.grid import BackgroundGrid
from bsmpm.particles import ParticleBlock, init_block
from bsmpm.splines import TensorBasis3D


@pytest.fixture
def small_basis():
    """Quadratic 4x3x2 grid over an anisotropic box."""
    return TensorBasis3D.create((0.0, 0.0, 0.0), (4.0, 3.0, 1.0), (4, 3, 2), 2)


@pytest.fixture
def small_grid(small_basis):
    return BackgroundGrid(basis=small_basis)


def random_cloud(tb, n, rng, margin=0.05):
    """Particles scattered uniformly inside the domain interior."""
    lo = tb.domain_min + margin * (tb.domain_max - tb.domain_min)
    hi = tb.domain_max - margin * (tb.domain_max - tb.domain_min)
    from bsmpm.particles import ParticleSet

    pset = ParticleSet.zeros(n)
    pset.x[:] = rng.uniform(lo, hi, size=(n, 3))
    pset.x0[:] = pset.x
    pset.mass[:] = rng.uniform(0.5, 2.0, size=n)
    pset.V0[:] = rng.uniform(0.1, 1.0, size=n)
    pset.V[:] = pset.V0
    pset.v[:] = rng.normal(size=(n, 3))
    return pset


@pytest.fixture
def block_particles(small_grid):
    block = ParticleBlock(
        lo=(0.0, 0.0, 0.0), hi=(4.0, 3.0, 1.0), ppc=(2, 2, 2), density=1000.0
    )
    return init_block(block, small_grid)
