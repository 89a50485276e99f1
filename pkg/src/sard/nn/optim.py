"""Adam optimizer and the stepwise learning-rate schedule."""

from __future__ import annotations

import numpy as np


class DivergenceError(RuntimeError):
    """Raised when a gradient or parameter goes non-finite."""

    def __init__(self, where: str):
        super().__init__(f"non-finite gradient in {where}; training diverged")
        self.where = where


def lr_at(epoch: int, lr0: float = 0.002, decay: float = 0.8,
          decay_step: int = 5) -> float:
    """lr = lr0 * decay^floor(epoch / decay_step); epochs count from 0."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return lr0 * decay ** (epoch // decay_step)


class Adam:
    """Standard Adam with bias correction.

    ``params`` is an ordered list of (name, array); arrays are updated in
    place so layers see new values without re-wiring.
    """

    def __init__(self, params, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for _, p in self.params]
        self.v = [np.zeros_like(p) for _, p in self.params]

    def step(self, grads, lr: float) -> None:
        """One update from an ordered (name, grad) list matching params."""
        if len(grads) != len(self.params):
            raise ValueError(f"got {len(grads)} gradients for {len(self.params)} parameters")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for i, ((pname, p), (gname, g)) in enumerate(zip(self.params, grads)):
            if g is None or g.shape != p.shape:
                raise ValueError(f"gradient {gname} does not match parameter {pname}")
            if not np.isfinite(g).all():
                raise DivergenceError(pname)
            m, v = self.m[i], self.v[i]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            mhat = m / bc1
            vhat = v / bc2
            p -= (lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.dtype)
