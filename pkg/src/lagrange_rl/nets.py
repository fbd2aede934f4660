"""Small feed-forward networks with hand-written backward passes.

Parameters live in flat ``dict[str, np.ndarray]`` containers so optimizers,
checkpoints and finite-difference checks can treat every network uniformly.
Forward passes accept a single vector ``(d,)`` or a batch ``(B, d)`` and
return caches that the matching backward pass consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Params = dict[str, np.ndarray]

ACTIVATIONS = ("tanh", "elu")


def _parse_widths(widths: str | tuple[int, ...] | list[int]) -> tuple[int, ...]:
    """Accept hyperparameter-table style ``"100-100"`` or an int tuple."""
    if isinstance(widths, str):
        return tuple(int(w) for w in widths.split("-") if w)
    return tuple(int(w) for w in widths)


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a fully-connected net.

    The output layer is linear unless ``activate_output`` is set (used for
    shared feature torsos).
    """

    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "tanh"
    activate_output: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden", _parse_widths(self.hidden))
        if self.input_dim <= 0 or self.output_dim <= 0 or any(w <= 0 for w in self.hidden):
            raise ValueError("all layer dimensions must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = (self.input_dim, *self.hidden, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))


def mlp_init(spec: MlpSpec, rng: np.random.Generator, scale: float = 1.0) -> Params:
    """Glorot-uniform weights, zero biases. ``scale`` shrinks the final layer."""
    params: Params = {}
    n_layers = len(spec.layer_dims)
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        if i == n_layers - 1:
            bound *= scale
        params[f"w{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"b{i}"] = np.zeros(fan_out)
    return params


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    return np.where(z > 0, z, np.expm1(z))  # elu, alpha = 1


def _act_grad(z: np.ndarray, h: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return 1.0 - h * h
    return np.where(z > 0, 1.0, h + 1.0)


def mlp_forward(spec: MlpSpec, params: Params, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Run the net; returns (output, cache). Output has the batch shape of x."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[-1] != spec.input_dim:
        raise ValueError(f"input dim {h.shape[-1]} != spec input_dim {spec.input_dim}")
    cache = [h]
    n_layers = len(spec.layer_dims)
    for i in range(n_layers):
        z = h @ params[f"w{i}"] + params[f"b{i}"]
        activated = i < n_layers - 1 or spec.activate_output
        h = _act(z, spec.activation) if activated else z
        cache.append(z)
        cache.append(h)
    out = h[0] if squeeze else h
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite mlp output")
    return out, cache


def mlp_backward(spec: MlpSpec, params: Params, cache: list, dout: np.ndarray) -> tuple[np.ndarray, Params]:
    """Backprop ``dout`` (same shape as the forward output) to (dx, grads)."""
    dout = np.asarray(dout, dtype=float)
    squeeze = dout.ndim == 1
    dh = dout[None, :] if squeeze else dout
    grads: Params = {}
    n_layers = len(spec.layer_dims)
    for i in reversed(range(n_layers)):
        h_in = cache[2 * i]
        z = cache[2 * i + 1]
        h_out = cache[2 * i + 2]
        activated = i < n_layers - 1 or spec.activate_output
        dz = dh * _act_grad(z, h_out, spec.activation) if activated else dh
        grads[f"w{i}"] = h_in.T @ dz
        grads[f"b{i}"] = dz.sum(axis=0)
        dh = dz @ params[f"w{i}"].T
    return (dh[0] if squeeze else dh), grads


# ---------------------------------------------------------------------------
# Recurrent cell (partial-observability option; same forward/grad contract)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LstmSpec:
    input_dim: int
    hidden_dim: int


def lstm_init(spec: LstmSpec, rng: np.random.Generator) -> Params:
    d, n = spec.input_dim, spec.hidden_dim
    bound = np.sqrt(6.0 / (d + n + 4 * n))
    params = {
        "wx": rng.uniform(-bound, bound, size=(d, 4 * n)),
        "wh": rng.uniform(-bound, bound, size=(n, 4 * n)),
        "b": np.zeros(4 * n),
    }
    params["b"][n : 2 * n] = 1.0  # forget-gate bias
    return params


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_step(spec: LstmSpec, params: Params, x: np.ndarray, state: tuple[np.ndarray, np.ndarray]):
    """One cell step for a batch: (x, (h, c)) -> ((h', c'), cache)."""
    h, c = state
    n = spec.hidden_dim
    gates = x @ params["wx"] + h @ params["wh"] + params["b"]
    i = _sigmoid(gates[:, :n])
    f = _sigmoid(gates[:, n : 2 * n])
    g = np.tanh(gates[:, 2 * n : 3 * n])
    o = _sigmoid(gates[:, 3 * n :])
    c2 = f * c + i * g
    tc2 = np.tanh(c2)
    h2 = o * tc2
    cache = (x, h, c, i, f, g, o, c2, tc2)
    return (h2, c2), cache


def lstm_backward(spec: LstmSpec, params: Params, cache, dh2: np.ndarray, dc2: np.ndarray):
    """Backprop one step: returns (dx, dh, dc, grads)."""
    x, h, c, i, f, g, o, c2, tc2 = cache
    do = dh2 * tc2
    dc_total = dc2 + dh2 * o * (1.0 - tc2 * tc2)
    df = dc_total * c
    di = dc_total * g
    dg = dc_total * i
    dc = dc_total * f
    dgates = np.concatenate(
        [di * i * (1 - i), df * f * (1 - f), dg * (1.0 - g * g), do * o * (1 - o)], axis=1
    )
    grads = {
        "wx": x.T @ dgates,
        "wh": h.T @ dgates,
        "b": dgates.sum(axis=0),
    }
    dx = dgates @ params["wx"].T
    dh = dgates @ params["wh"].T
    return dx, dh, dc, grads


# ---------------------------------------------------------------------------
# Parameter-dict helpers
# ---------------------------------------------------------------------------

def prefix_params(prefix: str, params: Params) -> Params:
    return {f"{prefix}/{k}": v for k, v in params.items()}


def select_params(prefix: str, params: Params) -> Params:
    cut = len(prefix) + 1
    return {k[cut:]: v for k, v in params.items() if k.startswith(prefix + "/")}


def add_grads(total: Params, extra: Params, scale: float = 1.0) -> None:
    """Accumulate ``extra`` into ``total`` in place."""
    for k, v in extra.items():
        if k in total:
            total[k] = total[k] + scale * v
        else:
            total[k] = scale * v


def zeros_like_params(params: Params) -> Params:
    return {k: np.zeros_like(v) for k, v in params.items()}


def copy_params(params: Params) -> Params:
    return {k: v.copy() for k, v in params.items()}


def flatten_params(params: Params) -> np.ndarray:
    return np.concatenate([params[k].ravel() for k in sorted(params)]) if params else np.zeros(0)


def unflatten_params(flat: np.ndarray, like: Params) -> Params:
    out: Params = {}
    i = 0
    for k in sorted(like):
        n = like[k].size
        out[k] = flat[i : i + n].reshape(like[k].shape).copy()
        i += n
    return out
