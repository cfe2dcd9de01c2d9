"""Independent numpy oracles and small utilities shared by the tests."""

import numpy as np

from strnet.numerics import grad_check


def sig(a):
    return 1.0 / (1.0 + np.exp(-a))


def np_gru_sequence(x, p, h=None):
    """Step-by-step GRU recurrence over the rows of ``x`` (T, C)."""
    d = {k: v.data for k, v in p.named_parameters()}
    h = np.zeros(d["u_z"].shape[0]) if h is None else h
    out = []
    for xt in x:
        z = sig(xt @ d["w_z"] + h @ d["u_z"] + d["b_z"])
        r = sig(xt @ d["w_r"] + h @ d["u_r"] + d["b_r"])
        n = np.tanh(xt @ d["w_n"] + (r * h) @ d["u_n"] + d["b_n"])
        h = (1 - z) * n + z * h
        out.append(h)
    return np.array(out)


def np_mlp(x, layers):
    for i, layer in enumerate(layers):
        x = x @ layer.weight.data + layer.bias.data
        if i < len(layers) - 1:
            x = np.maximum(x, 0.0)
    return x


def softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def randomize(module, rng, scale=1.0):
    for t in module.parameters():
        t.data = rng.uniform(-scale, scale, t.shape)
    return module


def module_grad_error(fn, inputs, module, rng):
    """grad_check of ``sum(fn(*inputs) * probe)`` over inputs and every module parameter."""
    params = module.parameters()
    probe = rng.normal(size=fn(*inputs).shape)
    n = len(inputs)
    res = grad_check(lambda *xs: (fn(*xs[:n]) * probe).sum(), [*inputs, *params])
    return res
