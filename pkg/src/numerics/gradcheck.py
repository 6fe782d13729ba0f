"""
Central-difference verification of analytic gradients.
"""

import logging
import math
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from ..errors import GradcheckError
from .params import ParamStore

logger = logging.getLogger(__name__)

Objective = Callable[[ParamStore], float]


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


def gradcheck_per_parameter(
    f: Objective,
    params: ParamStore,
    subset: Optional[Iterable[str]] = None,
    h: float = 1e-4,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Dict[str, float]:
    """
    Compares analytic gradients with ``(f(theta + h) - f(theta - h)) / 2h``.

    ``f`` must be deterministic and, on each call, zero the gradients of
    ``params`` and refill them for the current values.

    :param f: Objective returning a scalar loss.
    :param params: Parameters perturbed in place (restored afterwards).
    :param subset: Names to check; all parameters when omitted.
    :param h: Finite-difference step.
    :param max_entries: If set, check at most this many randomly chosen entries per parameter.
    :param rng: Generator used to choose entries; defaults to seed 0.
    :return: Worst relative error per checked parameter name, in check order.
    :raises GradcheckError: If ``f`` returns a non-finite value.
    """
    names = list(subset) if subset is not None else params.names()
    rng = rng if rng is not None else np.random.default_rng(0)

    _evaluate(f, params, "analytic pass")
    analytic = {name: params.grad(name).copy() for name in names}

    report = {}
    for name in names:
        value = params[name]
        flat = value.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = np.sort(rng.choice(flat.size, size=max_entries, replace=False))

        worst = 0.0
        for index in indices:
            original = flat[index]
            flat[index] = original + h
            upper = _evaluate(f, params, f"{name}[{index}] + h")
            flat[index] = original - h
            lower = _evaluate(f, params, f"{name}[{index}] - h")
            flat[index] = original
            numeric = (upper - lower) / (2.0 * h)
            worst = max(worst, relative_error(float(analytic[name].reshape(-1)[index]), numeric))
        report[name] = worst
        logger.debug("gradcheck %s: %d entries, worst relative error %.3e", name, len(indices), worst)

    # leave the gradients consistent with the restored values
    _evaluate(f, params, "restore pass")
    return report


def finite_diff_gradcheck(
    f: Objective,
    params: ParamStore,
    subset: Optional[Iterable[str]] = None,
    h: float = 1e-4,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Maximum relative error over :func:`gradcheck_per_parameter`.

    Relative error is ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    report = gradcheck_per_parameter(f, params, subset, h, max_entries, rng)
    return max(report.values(), default=0.0)


def _evaluate(f: Objective, params: ParamStore, context: str) -> float:
    value = float(f(params))
    if not math.isfinite(value):
        raise GradcheckError(f"Objective is not finite ({value}) during {context}")
    return value
