from __future__ import annotations

import numpy as np
import pytest

from nlspec.cli.config import InlineSpec
from nlspec.cli.scenarios import build_spec
from nlspec.fields import constant_kernel, kernel_set, sample_field, uniform_kernel
from nlspec.grid import build_spatial_grid, build_time_grid
from nlspec.operator import OperatorSpec


def inline(n: int = 40, steps: int = 40, **fields) -> OperatorSpec:
    """Spec from an inline description, the same path the CLI uses."""
    return build_spec(InlineSpec.model_validate(fields), n, steps)


def random_spec(rng: np.random.Generator, n: int, l: int, steps: int = 24, coupled: bool = True) -> OperatorSpec:
    """Random cooperative raw spec: positive D diagonal, nonnegative off-diagonal A, smooth in (x, t)."""
    grid = build_spatial_grid((0.0, 1.0), n)
    tg = build_time_grid(steps)
    a0 = rng.uniform(-1.0, 1.0, (l, l))
    a1 = rng.uniform(-0.5, 0.5, (l, l))
    off = ~np.eye(l, dtype=bool)
    a0[off] = np.abs(a0[off]) + 0.1
    a1[off] = np.minimum(np.abs(a1[off]), 0.5 * a0[off])
    d = np.diag(rng.uniform(0.2, 1.5, l))
    if coupled:
        d[off] = rng.uniform(0.0, 0.3, (l, l))[off]
    phase = rng.uniform(0, 2 * np.pi)

    def A(points, t):
        x = points[:, 0][:, None, None]
        return a0 + a1 * np.sin(2 * np.pi * t + phase) + 0.3 * np.cos(np.pi * x) * np.eye(l)

    def D(points, t):
        return np.broadcast_to(d * (1 + 0.2 * np.sin(2 * np.pi * t)), (points.shape[0], l, l))

    ks = kernel_set([uniform_kernel(1) if i % 2 == 0 else constant_kernel(1.0) for i in range(l)], sigma=0.4)
    return OperatorSpec(grid, tg, ks, sample_field(A, grid, tg, "A"), D=sample_field(D, grid, tg, "D"),
                        name="random")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
