"""L-BFGS minimization wrapper with deterministic, pinned settings.

Thin layer over scipy's L-BFGS-B so every trainer shares one configuration:
zero initialization unless given, memory 10, gradient-norm stopping at
`tol`, and an effectively disabled relative-objective test so the gradient
criterion governs termination.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize as _sciopt


@dataclass
class MinimizeResult:
    weights: np.ndarray
    objective: float
    iterations: int
    converged: bool
    message: str


def minimize(
    objective_and_grad,
    n_params: int,
    x0: np.ndarray | None = None,
    max_iterations: int = 300,
    tol: float = 1e-5,
) -> MinimizeResult:
    """Minimize a function returning (value, gradient) from a zero start."""
    if x0 is None:
        x0 = np.zeros(n_params)
    else:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (n_params,):
            raise ValueError(f"x0 has shape {x0.shape}, expected ({n_params},)")

    result = _sciopt.minimize(
        objective_and_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": max_iterations,
            "maxcor": 10,
            "gtol": tol,
            # Keep the relative-decrease test from firing before the
            # gradient test: 1e-15 ~ machine epsilon scale.
            "ftol": 1e-15,
            "maxls": 50,
        },
    )
    message = result.message if isinstance(result.message, str) else result.message.decode()
    converged = bool(result.success) or "CONVERGENCE" in message.upper()
    if not converged and "ROUNDING" not in message.upper():
        warnings.warn(f"optimizer stopped without convergence: {message}")
    return MinimizeResult(
        weights=np.asarray(result.x, dtype=float),
        objective=float(result.fun),
        iterations=int(result.nit),
        converged=converged,
        message=message,
    )
