"""Finite-difference gradient checking against the tape's analytic gradients.

Central differences with a configurable step; relative error is
|analytic - numeric| / max(1, |numeric|) so tiny gradients do not blow up the
ratio.  ``f`` must be deterministic under its own seeding; this is verified by
evaluating it twice before anything else.
"""

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tape, backward


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    offending: list = field(default_factory=list)  # (param_name, coord, analytic, numeric, rel)

    def ok(self, tol=1e-3):
        return self.max_rel_error <= tol


def _scalar(f):
    out = f()
    v = out.values if hasattr(out, "values") else np.asarray(out)
    if v.shape != ():
        raise ValueError(f"f must produce a scalar, got shape {v.shape}")
    return float(v)


def finite_diff_check(f, params, step=1e-4, tol=1e-3, sample=None, seed=0, exclude=None):
    """Compare analytic grads of ``f`` w.r.t. ``params`` with central differences.

    sample: if set, check that many randomly chosen coordinates per parameter
    instead of all of them.  exclude: optional ``(param, flat_index) -> bool``
    predicate to skip known kink coordinates (e.g. relu inputs at zero).
    Returns a GradCheckReport; coordinates above ``tol`` are listed in it.
    """
    base = _scalar(f)
    again = _scalar(f)
    if base != again:
        raise ValueError("f is not deterministic; gradient check would be meaningless")

    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = f()
    backward(loss, tape)
    analytic = [np.zeros_like(p.values) if p.grad is None else p.grad.copy() for p in params]

    rng = np.random.default_rng(seed)
    max_rel = 0.0
    n_checked = 0
    offending = []
    for p, a in zip(params, analytic):
        flat = p.values.reshape(-1)
        n = flat.shape[0]
        if sample is None or sample >= n:
            coords = range(n)
        else:
            coords = sorted(rng.choice(n, size=sample, replace=False).tolist())
        for c in coords:
            if exclude is not None and exclude(p, c):
                continue
            keep = flat[c]
            flat[c] = keep + step
            up = _scalar(f)
            flat[c] = keep - step
            down = _scalar(f)
            flat[c] = keep
            numeric = (up - down) / (2.0 * step)
            rel = abs(a.reshape(-1)[c] - numeric) / max(1.0, abs(numeric))
            n_checked += 1
            if rel > max_rel:
                max_rel = rel
            if rel > tol:
                offending.append((p.name or "<unnamed>", int(c), float(a.reshape(-1)[c]), float(numeric), float(rel)))
    return GradCheckReport(max_rel_error=max_rel, n_checked=n_checked, offending=offending)
