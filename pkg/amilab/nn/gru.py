"""Single-layer gated recurrent cell with a per-timestep logistic head, trained by BPTT.

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    n = tanh(x Wn + (r * h) Un + bn)
    h' = (1 - z) * n + z * h
    logit_t = h'_t wo + bo
"""
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from ..exceptions import ConfigurationError, NumericError
from .mlp import orthogonal
from .params import ParameterSet

GATES = ("z", "r", "n")


def init_gru(
    input_dim: int,
    hidden_dim: int,
    rng: np.random.Generator,
    prefix: str = "",
    owner: Optional[str] = None,
) -> ParameterSet:
    params = ParameterSet(owner=owner)
    scale = 1.0 / np.sqrt(max(input_dim, 1))
    for g in GATES:
        params.add(f"{prefix}W{g}", rng.uniform(-scale, scale, size=(input_dim, hidden_dim)))
        params.add(f"{prefix}U{g}", orthogonal(rng, (hidden_dim, hidden_dim), 1.0))
        params.add(f"{prefix}b{g}", np.zeros(hidden_dim))
    params.add(f"{prefix}wo", orthogonal(rng, (hidden_dim, 1), 0.01))
    params.add(f"{prefix}bo", np.zeros(1))
    return params


def _dims(params: ParameterSet, prefix: str) -> Tuple[int, int]:
    shape = params.shapes().get(f"{prefix}Wz")
    if shape is None:
        raise ConfigurationError(f"Missing recurrent parameters under prefix {prefix!r}")
    return shape


def gru_forward(
    params: ParameterSet, x: np.ndarray, prefix: str = ""
) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Logits (B, T) for sequences x (B, T, F), plus the cache needed by `gru_backward`."""
    x = np.asarray(x, dtype=np.float64)
    input_dim, hidden_dim = _dims(params, prefix)
    if x.ndim != 3 or x.shape[2] != input_dim:
        raise ConfigurationError(f"Sequence input has shape {x.shape}, expected (B, T, {input_dim})")
    b, t_len, _ = x.shape
    p = {name[len(prefix):]: arr for name, arr in params.items() if name.startswith(prefix)}

    hs = np.zeros((t_len + 1, b, hidden_dim))
    zs = np.zeros((t_len, b, hidden_dim))
    rs = np.zeros_like(zs)
    ns = np.zeros_like(zs)
    logits = np.zeros((b, t_len))
    for t in range(t_len):
        h = hs[t]
        xt = x[:, t, :]
        z = expit(xt @ p["Wz"] + h @ p["Uz"] + p["bz"])
        r = expit(xt @ p["Wr"] + h @ p["Ur"] + p["br"])
        n = np.tanh(xt @ p["Wn"] + (r * h) @ p["Un"] + p["bn"])
        hs[t + 1] = (1.0 - z) * n + z * h
        zs[t], rs[t], ns[t] = z, r, n
        logits[:, t] = (hs[t + 1] @ p["wo"])[:, 0] + p["bo"][0]
    return logits, {"h": hs, "z": zs, "r": rs, "n": ns}


def gru_predict(params: ParameterSet, x: np.ndarray, prefix: str = "") -> np.ndarray:
    logits, _ = gru_forward(params, x, prefix)
    return expit(logits)


def gru_backward(
    params: ParameterSet, x: np.ndarray, d_logits: np.ndarray, prefix: str = ""
) -> ParameterSet:
    """Gradient of sum(logits * d_logits) with respect to every recurrent and head block."""
    x = np.asarray(x, dtype=np.float64)
    _, cache = gru_forward(params, x, prefix)
    p = {name[len(prefix):]: arr for name, arr in params.items() if name.startswith(prefix)}
    hs, zs, rs, ns = cache["h"], cache["z"], cache["r"], cache["n"]
    t_len = x.shape[1]

    g = {k: np.zeros_like(v) for k, v in p.items()}
    dh_next = np.zeros_like(hs[0])
    for t in reversed(range(t_len)):
        xt = x[:, t, :]
        h_prev, z, r, n = hs[t], zs[t], rs[t], ns[t]
        dl = d_logits[:, t][:, None]
        g["wo"] += hs[t + 1].T @ dl
        g["bo"] += dl.sum(axis=0)
        dh = dh_next + dl @ p["wo"].T

        dn = dh * (1.0 - z)
        dz = dh * (h_prev - n)
        dh_prev = dh * z

        dn_pre = dn * (1.0 - n * n)
        g["Wn"] += xt.T @ dn_pre
        g["Un"] += (r * h_prev).T @ dn_pre
        g["bn"] += dn_pre.sum(axis=0)
        d_rh = dn_pre @ p["Un"].T
        dr = d_rh * h_prev
        dh_prev += d_rh * r

        dz_pre = dz * z * (1.0 - z)
        g["Wz"] += xt.T @ dz_pre
        g["Uz"] += h_prev.T @ dz_pre
        g["bz"] += dz_pre.sum(axis=0)
        dh_prev += dz_pre @ p["Uz"].T

        dr_pre = dr * r * (1.0 - r)
        g["Wr"] += xt.T @ dr_pre
        g["Ur"] += h_prev.T @ dr_pre
        g["br"] += dr_pre.sum(axis=0)
        dh_prev += dr_pre @ p["Ur"].T

        dh_next = dh_prev

    grads = ParameterSet()
    for name in params.names():
        if not name.startswith(prefix):
            continue
        block = g[name[len(prefix):]]
        if not np.all(np.isfinite(block)):
            raise NumericError("Non-finite gradient", block=name)
        grads.add(name, block)
    return grads
