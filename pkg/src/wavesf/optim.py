"""Adam with decoupled weight decay, and the warmup + cosine schedule."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class ScheduleConfig:
    base_lr: float = 2e-4
    min_lr: float = 2e-6
    warmup_epochs: int = 5
    total_epochs: int = 60

    def validate(self):
        if not self.min_lr < self.base_lr:
            raise ValueError("min_lr must be below base_lr")
        if not 0 <= self.warmup_epochs < self.total_epochs:
            raise ValueError("warmup_epochs must lie in [0, total_epochs)")
        return self


def lr_at(epoch, sched: ScheduleConfig):
    """Linear ramp from min_lr to base_lr over the warmup, then cosine decay.

    lr(warmup_epochs) == base_lr and lr(total_epochs - 1) == min_lr exactly.
    """
    s = sched.validate()
    if not 0 <= epoch < s.total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {s.total_epochs})")
    if epoch < s.warmup_epochs:
        return s.min_lr + (s.base_lr - s.min_lr) * epoch / s.warmup_epochs
    span = s.total_epochs - 1 - s.warmup_epochs
    frac = 0.0 if span == 0 else (epoch - s.warmup_epochs) / span
    return s.min_lr + 0.5 * (s.base_lr - s.min_lr) * (1.0 + math.cos(math.pi * frac))


class Adam:
    """Bias-corrected Adam; weight decay is decoupled (applied before the update).

    Per step, for each parameter p with gradient g:

        p -= lr * wd * p
        m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
        p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)

    Gradients accumulate across backward calls; callers zero them per step.
    """

    def __init__(self, named_params, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=1e-4):
        self.named_params = list(named_params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data) for _, p in self.named_params]
        self.v = [np.zeros_like(p.data) for _, p in self.named_params]

    @classmethod
    def for_model(cls, model, **kw):
        return cls(model.named_parameters(), **kw)

    def step(self, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for i, (name, p) in enumerate(self.named_params):
            if p.grad is None:
                raise ValueError(f"adam: parameter {name!r} has no gradient")
            g = p.grad
            if self.weight_decay:
                p.data -= lr * self.weight_decay * p.data
            m = self.m[i]
            v = self.v[i]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self):
        for _, p in self.named_params:
            p.grad = None
