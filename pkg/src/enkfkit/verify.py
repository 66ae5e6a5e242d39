"""Built-in oracle and property checks, runnable from the command line.

Each check recomputes an expected result through an independent route
(dense solves, literal recursion, manufactured solutions, closed-form
counts) and compares the production path against it. `run_all` prints one
line per check and returns True only if every check passes.
"""

from __future__ import annotations

import numpy as np

from .enkf import SelectionOperator, ObservationBatch, analysis_step, member_deviations
from .linalg import sym_rank_k_update
from .metrics import rse
from .models import lorenz96, qg
from .models.qg import QGConfig
from .rng import make_rng
from .sherman import long_op_count, solve_sherman, solve_sherman_recursive
from .solvers import solve_cholesky, solve_svd


def _random_system(rng, nobs, nens):
    r = rng.uniform(0.5, 2.0, size=nobs)
    v = rng.standard_normal((nobs, nens)) / np.sqrt(nens)
    d = rng.standard_normal((nobs, nens))
    return r, v, d


def check_solver_agreement(instances: int = 20, seed: int = 101) -> bool:
    """All three solvers agree on random systems to 1e-8 relative."""
    rng = make_rng(seed)
    for _ in range(instances):
        nobs = int(rng.integers(10, 200))
        nens = int(rng.integers(2, 32))
        r, v, d = _random_system(rng, nobs, nens)
        z_sher = solve_sherman(r, v, d).z
        z_chol = solve_cholesky(r, v, d).z
        z_svd = solve_svd(r, v * np.sqrt(nens - 1.0), d).z
        scale = np.abs(z_sher).max()
        if np.abs(z_sher - z_chol).max() > 1e-9 * scale:
            return False
        if np.abs(z_sher - z_svd).max() > 1e-8 * scale:
            return False
    return True


def check_recursive_oracle(seed: int = 202) -> bool:
    """The iterative sweep equals the literal recursion for small ensembles."""
    rng = make_rng(seed)
    for nens in range(1, 7):
        nobs = int(rng.integers(4, 30))
        r, v, d = _random_system(rng, nobs, nens)
        z = solve_sherman(r, v, d).z
        for i in range(nens):
            zi = solve_sherman_recursive(r, v, d[:, i])
            if np.abs(zi - z[:, i]).max() > 1e-12 * max(1.0, np.abs(z).max()):
                return False
    return True


def check_op_count(seed: int = 303) -> bool:
    """The instrumented sweep reports the closed-form operation count."""
    rng = make_rng(seed)
    for _ in range(6):
        nobs = int(rng.integers(1, 60))
        nens = int(rng.integers(1, 20))
        r = rng.uniform(0.5, 2.0, size=nobs)
        v = rng.standard_normal((nobs, nens))
        d = rng.standard_normal((nobs, nens))
        result = solve_sherman(r, v, d, count_ops=True)
        if result.long_ops != long_op_count(nens, nobs):
            return False
    return True


def check_kalman_oracle(seed: int = 404) -> bool:
    """The analysis step matches the dense explicit-gain update."""
    rng = make_rng(seed)
    for _ in range(5):
        nstate = int(rng.integers(6, 20))
        nens = int(rng.integers(3, 6))
        nobs = int(rng.integers(2, nstate))
        x = rng.standard_normal((nstate, nens))
        idx = np.sort(rng.choice(nstate, size=nobs, replace=False))
        h = SelectionOperator.from_indices(idx)
        r = rng.uniform(0.2, 1.0, size=nobs)
        y = rng.standard_normal(nobs)
        eps = rng.standard_normal((nobs, nens)) * 0.1
        obs = ObservationBatch(y=y, perturbed=y[:, None] + eps, perturbations=eps)

        xa = analysis_step(x, obs, h, r, solver="sherman")

        s = member_deviations(x)
        p = s @ s.T
        hmat = np.zeros((nobs, nstate))
        hmat[np.arange(nobs), idx] = 1.0
        gain = p @ hmat.T @ np.linalg.inv(hmat @ p @ hmat.T + np.diag(r))
        expected = x + gain @ (obs.perturbed - hmat @ x)
        if np.abs(xa - expected).max() > 1e-9 * max(1.0, np.abs(expected).max()):
            return False
    return True


def check_rank_k_update(seed: int = 505) -> bool:
    """BLAS-assembled W equals the naive triple-loop product."""
    rng = make_rng(seed)
    nobs, nens = 15, 4
    r = rng.uniform(0.5, 2.0, size=nobs)
    v = rng.standard_normal((nobs, nens))
    w = sym_rank_k_update(v, r, alpha=0.5, beta=2.0)
    naive = np.zeros((nobs, nobs))
    for i in range(nobs):
        for j in range(nobs):
            naive[i, j] = 0.5 * sum(v[i, k] * v[j, k] for k in range(nens))
    naive += 2.0 * np.diag(r)
    return bool(np.abs(w - naive).max() <= 1e-13 * np.abs(naive).max())


def check_lorenz_rk4_order() -> bool:
    """Measured convergence order of the time stepper is at least 3.8."""
    x0 = 8.0 + np.sin(np.arange(40))
    ref = x0.copy()
    for _ in range(4000):
        ref = lorenz96.rk4_step(ref, 0.00025, 8.0)
    errors = []
    for dt in (0.02, 0.01):
        x = x0.copy()
        for _ in range(round(1.0 / dt)):
            x = lorenz96.rk4_step(x, dt, 8.0)
        errors.append(np.abs(x - ref).max())
    order = np.log2(errors[0] / errors[1])
    return bool(order >= 3.8)


def check_helmholtz() -> bool:
    """Manufactured solution converges at second order; solve inverts apply."""
    errors = []
    sizes = (17, 33, 65)
    for n in sizes:
        cfg = QGConfig(n=n, m=n, lx=1.0, ly=1.0, rkb=0, rkh=0, rkh2=0,
                       beta=0, rossby=0, froude=100.0)
        nx, ny = cfg.interior_shape
        xs = (np.arange(1, n - 1) * cfg.hx)[:, None]
        ys = (np.arange(1, n - 1) * cfg.hy)[None, :]
        psi_exact = np.sin(np.pi * xs) * np.sin(np.pi * ys)
        q = (-(np.pi ** 2 + np.pi ** 2) - cfg.froude) * psi_exact
        psi = qg.helmholtz_solve(q.reshape(cfg.nstate), cfg)
        errors.append(np.abs(psi - psi_exact.reshape(cfg.nstate)).max())
        rhs = qg.helmholtz_apply(psi, cfg)
        if np.abs(rhs - q.reshape(cfg.nstate)).max() > 1e-8 * np.abs(q).max():
            return False
    hs = [1.0 / (n - 1) for n in sizes]
    slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
    return bool(1.9 <= slope <= 2.1)


def check_arakawa() -> bool:
    """Advection stencil conserves the three domain sums."""
    rng = make_rng(606)
    f = rng.standard_normal((12, 9))
    g = rng.standard_normal((12, 9))

    def ring(a):  # include the boundary ring, where J is nonzero
        out = np.zeros((a.shape[0] + 2, a.shape[1] + 2))
        out[1:-1, 1:-1] = a
        return out

    jac = qg.arakawa_jacobian(ring(f), ring(g), 0.1, 0.2)
    scale = max(np.abs(jac).max(), 1.0)
    return bool(
        abs(jac.sum()) <= 1e-10 * scale * jac.size
        and abs((ring(f) * jac).sum()) <= 1e-10 * scale * jac.size
        and abs((ring(g) * jac).sum()) <= 1e-10 * scale * jac.size
        and np.abs(qg.arakawa_jacobian(f, f, 0.1, 0.2)).max() <= 1e-12 * scale
    )


CHECKS = [
    ("solver agreement (sherman / cholesky / svd)", check_solver_agreement),
    ("recursive oracle equals iterative sweep", check_recursive_oracle),
    ("operation count audit", check_op_count),
    ("dense Kalman-gain oracle", check_kalman_oracle),
    ("symmetric rank-k update vs naive product", check_rank_k_update),
    ("Lorenz-96 RK4 convergence order", check_lorenz_rk4_order),
    ("Helmholtz manufactured solution", check_helmholtz),
    ("advection Jacobian conservation", check_arakawa),
]


def run_all(verbose: bool = True) -> bool:
    ok = True
    for label, check in CHECKS:
        passed = check()
        ok = ok and passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {label}")
    return ok
