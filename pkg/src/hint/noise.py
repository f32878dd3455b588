"""Explicit randomness source for training-time sampling and dropout.

Model code never touches torch's global RNG; it draws from a Noise object
passed in by the trainer. Every draw bumps ``draws`` so tests can audit
that inference consumes no randomness.
"""

import torch


class Noise:
    def __init__(self, seed: int = 0):
        self.gen = torch.Generator().manual_seed(int(seed))
        self.draws = 0

    def normal(self, shape, dtype=torch.float32):
        self.draws += 1
        return torch.randn(shape, generator=self.gen, dtype=dtype)

    def dropout(self, x: torch.Tensor, p: float) -> torch.Tensor:
        if p <= 0.0:
            return x
        self.draws += 1
        keep = torch.rand(x.shape, generator=self.gen, dtype=x.dtype) >= p
        return x * keep / (1.0 - p)

    def get_state(self):
        return self.gen.get_state()

    def set_state(self, state):
        self.gen.set_state(state)
