"""Dense networks with analytic reverse-mode gradients.

Blocks are named `<prefix>W<i>` (shape in×out) and `<prefix>b<i>` for layer i. Hidden layers use the
spec's activation; the output layer is linear.
"""
from typing import List, Optional, Tuple

import numpy as np

from ..exceptions import ConfigurationError, NumericError
from ..schemas.network import Activation, MLPSpec
from .params import ParameterSet


def orthogonal(rng: np.random.Generator, shape: Tuple[int, int], gain: float) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_params(
    spec: MLPSpec,
    rng: np.random.Generator,
    prefix: str = "",
    hidden_gain: float = 1.0,
    output_gain: float = 0.01,
    owner: Optional[str] = None,
) -> ParameterSet:
    params = ParameterSet(owner=owner)
    dims = spec.layer_dims
    for i in range(spec.n_layers):
        gain = output_gain if i == spec.n_layers - 1 else hidden_gain
        params.add(f"{prefix}W{i}", orthogonal(rng, (dims[i], dims[i + 1]), gain))
        params.add(f"{prefix}b{i}", np.zeros(dims[i + 1]))
    return params


def _activate(spec: MLPSpec, z: np.ndarray) -> np.ndarray:
    if spec.activation == Activation.RELU:
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(spec: MLPSpec, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if spec.activation == Activation.RELU:
        return (z > 0.0).astype(np.float64)
    return 1.0 - a * a


def _check_layout(spec: MLPSpec, params: ParameterSet, prefix: str) -> None:
    dims = spec.layer_dims
    for i in range(spec.n_layers):
        w_name, b_name = f"{prefix}W{i}", f"{prefix}b{i}"
        if w_name not in params or b_name not in params:
            raise ConfigurationError(f"Parameter layout does not match spec: missing layer {i} ({prefix!r})")
        shapes = params.shapes()
        if shapes[w_name] != (dims[i], dims[i + 1]) or shapes[b_name] != (dims[i + 1],):
            raise ConfigurationError(
                f"Parameter layout mismatch at layer {i}: {shapes[w_name]} / {shapes[b_name]}"
            )


def _as_batch(spec: MLPSpec, x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ConfigurationError(f"Input has shape {x.shape}, expected (*, {spec.input_dim})")
    return x, single


def _forward_cache(
    spec: MLPSpec, params: ParameterSet, x: np.ndarray, prefix: str
) -> Tuple[np.ndarray, List[np.ndarray], List[np.ndarray]]:
    pre: List[np.ndarray] = []
    post: List[np.ndarray] = [x]
    h = x
    for i in range(spec.n_layers):
        z = h @ params[f"{prefix}W{i}"] + params[f"{prefix}b{i}"]
        if i < spec.n_layers - 1:
            pre.append(z)
            h = _activate(spec, z)
            post.append(h)
        else:
            h = z
    return h, pre, post


def forward(spec: MLPSpec, params: ParameterSet, x: np.ndarray, prefix: str = "") -> np.ndarray:
    _check_layout(spec, params, prefix)
    xb, single = _as_batch(spec, x)
    out, _, _ = _forward_cache(spec, params, xb, prefix)
    return out[0] if single else out


def backward(
    spec: MLPSpec,
    params: ParameterSet,
    x: np.ndarray,
    output_grad: np.ndarray,
    prefix: str = "",
    return_input_grad: bool = False,
):
    """Gradient of sum(output * output_grad) with respect to every block (and optionally x)."""
    _check_layout(spec, params, prefix)
    xb, single = _as_batch(spec, x)
    g = np.asarray(output_grad, dtype=np.float64)
    if single:
        g = g[None, :]
    if g.shape != (xb.shape[0], spec.output_dim):
        raise ConfigurationError(f"Output gradient has shape {g.shape}, expected ({xb.shape[0]}, {spec.output_dim})")

    _, pre, post = _forward_cache(spec, params, xb, prefix)
    grads: dict = {}
    delta = g
    for i in reversed(range(spec.n_layers)):
        grads[f"{prefix}W{i}"] = post[i].T @ delta
        grads[f"{prefix}b{i}"] = delta.sum(axis=0)
        delta = delta @ params[f"{prefix}W{i}"].T
        if i > 0:
            delta = delta * _activation_grad(spec, pre[i - 1], post[i])

    result = ParameterSet()
    for i in range(spec.n_layers):
        for name in (f"{prefix}W{i}", f"{prefix}b{i}"):
            if not np.all(np.isfinite(grads[name])):
                raise NumericError("Non-finite gradient", block=name)
            result.add(name, grads[name])
    if return_input_grad:
        return result, (delta[0] if single else delta)
    return result
