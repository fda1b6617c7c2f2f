"""Independent reference computations shared by the test modules.

Nothing here calls the package's integrators or derivative formulas: the
oracles use scipy's matrix exponential, direct cumulants and plain power
series so that agreement is evidence rather than tautology.
"""

from __future__ import annotations

from math import comb, factorial

import numpy as np
import pytest
from scipy.linalg import expm

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(key: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[key] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {key}: {detail}")


# sampling helpers


def gue(n, rng):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def constrained(n, rng):
    h = gue(n, rng)
    h -= np.trace(h).real / n * np.eye(n)
    return h / np.sqrt(0.5 * np.trace(h @ h).real)


def ket(n, rng):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def same_ray(a, b) -> float:
    ov = np.vdot(a, b)
    return float(np.linalg.norm(a * ov / abs(ov) - b))


@pytest.fixture
def rng(request):
    # stable per-test seed derived from the test name
    seed = sum(ord(c) for c in request.node.name)
    return np.random.default_rng(seed)


# phase oracles


def exact_schrodinger_phase(h, psi, times, refine: int = 64):
    """``h1 t + arg <psi|exp(-i t H)|psi>``, unwrapped along a dense grid from 0."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    h1 = float(np.vdot(psi, h @ psi).real)
    out = np.empty(len(times))
    for i, t in enumerate(times):
        grid = np.linspace(0.0, t, refine * max(1, int(np.ceil(abs(t)))) + 1)
        args = [np.angle(np.vdot(psi, expm(-1j * s * h) @ psi)) for s in grid]
        out[i] = h1 * t + np.unwrap(args)[-1]
    return out


def cumulant_derivatives(h, psi, k_max: int = 6):
    """Phase derivatives at 0 of a Schrodinger curve from cumulants of ``H``.

    Odd orders are ``(-1)^(m+1) kappa_(2m+1)``; even orders vanish.
    """
    e, u = np.linalg.eigh(h)
    p = np.abs(u.conj().T @ psi) ** 2
    mu = [float(p @ e**k) for k in range(k_max + 1)]
    kappa = [0.0] * (k_max + 1)
    for n in range(1, k_max + 1):
        kappa[n] = mu[n] - sum(comb(n - 1, k - 1) * kappa[k] * mu[n - k] for k in range(1, n))
    out = {}
    for k in range(1, k_max + 1):
        out[k] = (-1) ** ((k - 1) // 2 + 1) * kappa[k] if k % 2 else 0.0
    out[1] = 0.0
    return out


def _ser_mul(a, b):
    m = len(a)
    return np.array([sum(a[i] * b[k - i] for i in range(k + 1)) for k in range(m)])


def _ser_log(c):
    """Series of ``log(c(t)) - log c(0)`` by ``(log c)' = c' / c``."""
    m = len(c)
    inv = np.zeros(m, dtype=complex)
    inv[0] = 1 / c[0]
    for k in range(1, m):
        inv[k] = -sum(c[j] * inv[k - j] for j in range(1, k + 1)) / c[0]
    dc = np.array([(k + 1) * c[k + 1] for k in range(m - 1)] + [0])
    q = _ser_mul(dc, inv)
    return np.concatenate([[0], [q[k - 1] / k for k in range(1, m)]])


def product_ket_series(hams, psi, order: int):
    """Taylor coefficients of ``prod_j exp(-i t H_j) psi`` by composing exponential series."""
    n = len(psi)
    total = [np.eye(n, dtype=complex)] + [np.zeros((n, n), dtype=complex)] * order
    for h in hams:
        ser = [np.linalg.matrix_power(-1j * h, k) / factorial(k) for k in range(order + 1)]
        total = [sum(total[i] @ ser[k - i] for i in range(k + 1)) for k in range(order + 1)]
    return np.array([m @ psi for m in total])


def log_series_derivatives(kets: np.ndarray) -> dict[int, float]:
    """Phase derivatives at 0 from ket Taylor coefficients.

    ``phi(t) = Im log <psi_0|psi_t> - Im int_0^t <psi|dpsi>``.
    """
    order = len(kets) - 1
    psi0 = kets[0]
    c = np.array([np.vdot(psi0, k) for k in kets])
    dk = np.array([(k + 1) * kets[k + 1] for k in range(order)])
    a = np.array([sum(np.vdot(kets[i], dk[k - i]) for i in range(k + 1)) for k in range(order)])
    integral = np.concatenate([[0], [a[k - 1] / k for k in range(1, order + 1)]])
    phi = np.imag(_ser_log(c)) - np.imag(integral)
    return {k: float(factorial(k) * phi[k]) for k in range(1, order + 1)}


def qubit_phase(theta, t):
    """Phase at ``t`` for ``H = n . sigma`` with polar angle ``theta``, from spin up."""
    ct = np.cos(theta)
    return ct * t + np.angle(np.cos(t) - 1j * ct * np.sin(t))


def qubit_scan_max(t, nodes: int = 200001) -> tuple[float, float]:
    """Brute-force best phase at ``t`` over all constrained qubit hamiltonians."""
    theta = np.linspace(0, np.pi, nodes)
    vals = qubit_phase(theta, t)
    k = int(np.argmax(vals))
    return float(vals[k]), float(theta[k])
