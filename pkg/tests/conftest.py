import numpy as np
import pytest

from binn.core import Dataset

# filled by test_acceptance.report, one line per criterion
ACCEPTANCE_REPORT = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for tag in sorted(ACCEPTANCE_REPORT, key=lambda t: int(t[2:])):
            terminalreporter.write_line(ACCEPTANCE_REPORT[tag])


def random_dataset(n=30, dim=2, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, dim))
    y = np.sin(2.0 * x).sum(axis=1) + 0.05 * rng.standard_normal(n)
    return Dataset(x, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_model(seed, dim=2, modes=2, sizes=3, cov_scale=0.05):
    """A model with random means and random PD covariances on the unit box."""
    from binn.basis import BasisSpec, equispaced_centers
    from binn.core import ModelConfig, Scaler
    from binn.model import BinnModel

    rng = np.random.default_rng(seed)
    sizes = [sizes] * dim if np.isscalar(sizes) else list(sizes)
    cfg = ModelConfig(modes=modes, basis_counts=tuple(sizes), length_scales=0.4, noise_variance=0.01)
    bases = [BasisSpec(equispaced_centers(j), 0.4) for j in sizes]
    means, covs = [], []
    for j in sizes:
        k = modes * j
        a = rng.normal(size=(k, k))
        means.append(rng.normal(0.0, 1.0, size=k))
        covs.append(cov_scale * (a @ a.T / k + 0.1 * np.eye(k)))
    return BinnModel(cfg, Scaler(np.zeros(dim), np.ones(dim)), bases, means, covs,
                     [np.zeros(k * modes) for k in sizes])


def mc_variance_oracle(model, x, count, seed):
    """Sample every (d, m) weight block independently and evaluate the sum of products.

    Written against the raw model fields only, so it shares no code with the
    library's predictive or sampling routines.
    """
    rng = np.random.default_rng(seed)
    u = (np.asarray(x, dtype=float) - model.scaler.lower) / (model.scaler.upper - model.scaler.lower)
    total = np.zeros(count)
    for m in range(model.config.modes):
        term = np.ones(count)
        for d, spec in enumerate(model.bases):
            j = len(spec.centers)
            phi = np.exp(-((u[d] - spec.centers) ** 2) / (2 * spec.length_scale**2))
            mu = model.means[d][m * j:(m + 1) * j]
            V = model.covs[d][m * j:(m + 1) * j, m * j:(m + 1) * j]
            # scalar projection: phi^T w ~ N(phi^T mu, phi^T V phi)
            s = np.sqrt(max(phi @ V @ phi, 0.0))
            term *= phi @ mu + s * rng.standard_normal(count)
        total += term
    return total
