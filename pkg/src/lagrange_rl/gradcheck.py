"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .nets import Params, copy_params


def grad_check(loss_fn, params: Params, h: float = 1e-5,
               max_coords: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Compare ``loss_fn``'s analytic gradient against central differences.

    ``loss_fn(params)`` must return ``(scalar_loss, grads_dict)``. Every
    coordinate is perturbed by ``+-h`` unless ``max_coords`` caps the count
    (coordinates then chosen by ``rng``). Returns the maximum relative error
    |fd - analytic| / max(|fd|, |analytic|, 1e-8) over the checked coordinates.
    """
    _, grads = loss_fn(params)
    grads = {k: np.zeros_like(v) for k, v in params.items()} | {
        k: np.asarray(g) for k, g in grads.items()}
    work = copy_params(params)
    worst = 0.0
    for key in sorted(params):
        flat = work[key].reshape(-1)
        n = flat.size
        if max_coords is not None and n > max_coords:
            if rng is None:
                rng = np.random.default_rng(0)
            idx = rng.choice(n, size=max_coords, replace=False)
        else:
            idx = range(n)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            up, _ = loss_fn(work)
            flat[i] = orig - h
            dn, _ = loss_fn(work)
            flat[i] = orig
            fd = (up - dn) / (2.0 * h)
            an = float(np.asarray(grads[key]).reshape(-1)[i])
            err = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
            worst = max(worst, err)
    return worst
