"""1D network layers with explicit forward and backward passes.

Convolutions are lowered to batched matrix products over gathered kernel
columns, so the heavy lifting runs in BLAS. Every layer caches what its
backward pass needs; ``backward`` must follow the matching ``forward``.
Backward passes return ``(param_grads, input_grad)`` where the dict maps
store names to gradient arrays.

Parameters are held in float64; activations follow the dtype of the
input batch, so callers pick precision per pass (float32 for training
throughput, float64 for gradient checking) without code changes.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidSpec, InvariantViolation, ShapeMismatch
from .params import ParameterStore

Grads = dict[str, np.ndarray]

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
PRELU_INIT_SLOPE = 0.25


def kaiming_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv1d:
    """Strided 1D convolution with half-kernel zero padding.

    With odd kernel k and padding (k-1)//2 the output length is
    floor((T-1)/stride) + 1, so stride 2 halves even-length inputs exactly.
    """

    def __init__(
        self,
        store: ParameterStore,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int,
        rng: np.random.Generator,
    ) -> None:
        if kernel_size < 1 or stride < 1:
            raise InvalidSpec(f"kernel_size/stride must be >=1, got {kernel_size}/{stride}")
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = (kernel_size - 1) // 2
        fan_in = in_channels * kernel_size
        self.weight = store.add(f"{name}.weight", kaiming_uniform(
            rng, (out_channels, in_channels, kernel_size), fan_in))
        self.bias = store.add(f"{name}.bias", np.zeros(out_channels))
        self._cols: np.ndarray | None = None
        self._in_time: int = 0

    def out_length(self, time_steps: int) -> int:
        return (time_steps + 2 * self.padding - self.kernel_size) // self.stride + 1

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        batch, channels, time = x.shape
        if channels != self.in_channels:
            raise ShapeMismatch(f"{self.name}: expected {self.in_channels} channels, got {channels}")
        t_out = self.out_length(time)
        if t_out < 1:
            raise ShapeMismatch(f"{self.name}: input of length {time} collapses below 1 step")
        k, s, p = self.kernel_size, self.stride, self.padding
        xp = np.pad(x, ((0, 0), (0, 0), (p, p)))
        cols = np.empty((batch, channels, k, t_out), dtype=x.dtype)
        for j in range(k):
            cols[:, :, j, :] = xp[:, :, j : j + s * t_out : s]
        cols2 = cols.reshape(batch, channels * k, t_out)
        w2 = self.weight.reshape(self.out_channels, channels * k).astype(x.dtype, copy=False)
        y = np.matmul(w2, cols2)
        y += self.bias.astype(x.dtype, copy=False)[None, :, None]
        self._cols = cols2
        self._in_time = time
        return y

    def backward(self, grad_out: np.ndarray) -> tuple[Grads, np.ndarray]:
        cols2 = self._cols
        batch, _, t_out = grad_out.shape
        k, s, p = self.kernel_size, self.stride, self.padding
        c_in, time = self.in_channels, self._in_time
        w2 = self.weight.reshape(self.out_channels, c_in * k).astype(grad_out.dtype, copy=False)
        d_w2 = np.tensordot(grad_out, cols2, axes=([0, 2], [0, 2]))
        d_bias = grad_out.sum(axis=(0, 2))
        d_cols = np.matmul(w2.T, grad_out).reshape(batch, c_in, k, t_out)
        dxp = np.zeros((batch, c_in, time + 2 * p), dtype=grad_out.dtype)
        for j in range(k):
            dxp[:, :, j : j + s * t_out : s] += d_cols[:, :, j, :]
        dx = dxp[:, :, p : p + time] if p else dxp
        grads = {
            f"{self.name}.weight": d_w2.reshape(self.weight.shape),
            f"{self.name}.bias": d_bias,
        }
        return grads, np.ascontiguousarray(dx)


class ConvTranspose1d:
    """Fractionally-strided 1D convolution (transpose of Conv1d).

    Kernel/stride pairs must satisfy kernel >= stride with kernel - stride
    even; padding (kernel - stride)//2 then gives an exact stride-fold
    upsampling: T_out = stride * T_in.
    """

    def __init__(
        self,
        store: ParameterStore,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int,
        rng: np.random.Generator,
    ) -> None:
        if kernel_size < stride or (kernel_size - stride) % 2 != 0:
            raise InvalidSpec(
                f"{name}: need kernel >= stride with even difference, "
                f"got kernel={kernel_size}, stride={stride}"
            )
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = (kernel_size - stride) // 2
        fan_in = in_channels * kernel_size
        self.weight = store.add(f"{name}.weight", kaiming_uniform(
            rng, (in_channels, out_channels, kernel_size), fan_in))
        self.bias = store.add(f"{name}.bias", np.zeros(out_channels))
        self._x: np.ndarray | None = None

    def out_length(self, time_steps: int) -> int:
        return (time_steps - 1) * self.stride - 2 * self.padding + self.kernel_size

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        batch, channels, time = x.shape
        if channels != self.in_channels:
            raise ShapeMismatch(f"{self.name}: expected {self.in_channels} channels, got {channels}")
        k, s, p = self.kernel_size, self.stride, self.padding
        t_out = self.out_length(time)
        w2 = self.weight.reshape(self.in_channels, self.out_channels * k).astype(x.dtype, copy=False)
        u = np.matmul(w2.T, x).reshape(batch, self.out_channels, k, time)
        yp = np.zeros((batch, self.out_channels, t_out + 2 * p), dtype=x.dtype)
        for j in range(k):
            yp[:, :, j : j + s * time : s] += u[:, :, j, :]
        y = np.ascontiguousarray(yp[:, :, p : p + t_out]) if p else yp
        y += self.bias.astype(x.dtype, copy=False)[None, :, None]
        self._x = x
        return y

    def backward(self, grad_out: np.ndarray) -> tuple[Grads, np.ndarray]:
        x = self._x
        batch, _, time = x.shape
        k, s, p = self.kernel_size, self.stride, self.padding
        gp = np.pad(grad_out, ((0, 0), (0, 0), (p, p)))
        gcols = np.empty((batch, self.out_channels, k, time), dtype=grad_out.dtype)
        for j in range(k):
            gcols[:, :, j, :] = gp[:, :, j : j + s * time : s]
        gcols2 = gcols.reshape(batch, self.out_channels * k, time)
        w2 = self.weight.reshape(self.in_channels, self.out_channels * k).astype(
            grad_out.dtype, copy=False)
        dx = np.matmul(w2, gcols2)
        d_w = np.tensordot(x, gcols, axes=([0, 2], [0, 3]))
        d_bias = grad_out.sum(axis=(0, 2))
        grads = {f"{self.name}.weight": d_w, f"{self.name}.bias": d_bias}
        return grads, dx


class BatchNorm1d:
    """Per-channel batch normalization over batch and time axes.

    Uses population variance both for batch statistics and running
    estimates (momentum 0.1). Running statistics live in the parameter
    store as buffers so checkpoints capture eval-mode behavior; they never
    receive gradients.
    """

    def __init__(self, store: ParameterStore, name: str, channels: int) -> None:
        self.name = name
        self.channels = channels
        self.gamma = store.add(f"{name}.gamma", np.ones(channels))
        self.beta = store.add(f"{name}.beta", np.zeros(channels))
        self.running_mean = store.add(f"{name}.running_mean", np.zeros(channels))
        self.running_var = store.add(f"{name}.running_var", np.ones(channels))
        self._xhat: np.ndarray | None = None
        self._ivar: np.ndarray | None = None
        self._train_mode = False

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        if x.shape[1] != self.channels:
            raise ShapeMismatch(f"{self.name}: expected {self.channels} channels, got {x.shape[1]}")
        if train:
            mean = x.mean(axis=(0, 2))
            var = x.var(axis=(0, 2))
            if not self.running_mean.flags.writeable:
                raise InvariantViolation(f"{self.name}: frozen store cannot run in train mode")
            self.running_mean *= 1.0 - BN_MOMENTUM
            self.running_mean += BN_MOMENTUM * mean
            self.running_var *= 1.0 - BN_MOMENTUM
            self.running_var += BN_MOMENTUM * var
        else:
            mean = self.running_mean.astype(x.dtype, copy=False)
            var = self.running_var.astype(x.dtype, copy=False)
        ivar = 1.0 / np.sqrt(var + x.dtype.type(BN_EPS))
        xhat = (x - mean[None, :, None]) * ivar[None, :, None]
        self._xhat, self._ivar, self._train_mode = xhat, ivar, train
        gamma = self.gamma.astype(x.dtype, copy=False)
        beta = self.beta.astype(x.dtype, copy=False)
        return gamma[None, :, None] * xhat + beta[None, :, None]

    def backward(self, grad_out: np.ndarray) -> tuple[Grads, np.ndarray]:
        xhat, ivar = self._xhat, self._ivar
        d_gamma = (grad_out * xhat).sum(axis=(0, 2))
        d_beta = grad_out.sum(axis=(0, 2))
        d_xhat = grad_out * self.gamma.astype(grad_out.dtype, copy=False)[None, :, None]
        if self._train_mode:
            n = grad_out.shape[0] * grad_out.shape[2]
            sum_dxhat = d_xhat.sum(axis=(0, 2), keepdims=True)
            sum_dxhat_xhat = (d_xhat * xhat).sum(axis=(0, 2), keepdims=True)
            dx = (ivar[None, :, None] / n) * (n * d_xhat - sum_dxhat - xhat * sum_dxhat_xhat)
        else:
            dx = d_xhat * ivar[None, :, None]
        grads = {f"{self.name}.gamma": d_gamma, f"{self.name}.beta": d_beta}
        return grads, dx


class PReLU:
    """Parametric ReLU with a single learnable slope (init 0.25)."""

    def __init__(self, store: ParameterStore, name: str) -> None:
        self.name = name
        self.slope = store.add(f"{name}.slope", np.full(1, PRELU_INIT_SLOPE))
        self._scale: np.ndarray | None = None
        self._neg_x: np.ndarray | None = None

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        slope = x.dtype.type(self.slope[0])
        positive = x > 0.0
        self._scale = np.where(positive, x.dtype.type(1.0), slope)
        self._neg_x = np.where(positive, x.dtype.type(0.0), x)
        return x * self._scale

    def backward(self, grad_out: np.ndarray) -> tuple[Grads, np.ndarray]:
        d_slope = np.array([float(np.vdot(grad_out, self._neg_x))])
        return {f"{self.name}.slope": d_slope}, grad_out * self._scale


class Dropout:
    """Inverted dropout; identity in eval mode, draws a mask from the
    provided RNG stream in train mode."""

    def __init__(self, p: float) -> None:
        if not 0.0 <= p < 1.0:
            raise InvalidSpec(f"dropout p must be in [0,1), got {p}")
        self.p = p
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        if not train or self.p == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise InvariantViolation("dropout in train mode requires an RNG stream")
        mask = (rng.random(x.shape) >= self.p).astype(x.dtype)
        mask /= x.dtype.type(1.0 - self.p)
        self._mask = mask
        return x * mask

    def backward(self, grad_out: np.ndarray) -> tuple[Grads, np.ndarray]:
        if self._mask is None:
            return {}, grad_out
        return {}, grad_out * self._mask


class Linear:
    def __init__(
        self,
        store: ParameterStore,
        name: str,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
    ) -> None:
        self.name = name
        self.in_features = in_features
        self.out_features = out_features
        self.weight = store.add(f"{name}.weight", kaiming_uniform(
            rng, (out_features, in_features), in_features))
        self.bias = store.add(f"{name}.bias", np.zeros(out_features))
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        if x.shape[1] != self.in_features:
            raise ShapeMismatch(f"{self.name}: expected {self.in_features} features, got {x.shape[1]}")
        self._x = x
        w = self.weight.astype(x.dtype, copy=False)
        return x @ w.T + self.bias.astype(x.dtype, copy=False)

    def backward(self, grad_out: np.ndarray) -> tuple[Grads, np.ndarray]:
        grads = {
            f"{self.name}.weight": grad_out.T @ self._x,
            f"{self.name}.bias": grad_out.sum(axis=0),
        }
        return grads, grad_out @ self.weight.astype(grad_out.dtype, copy=False)


class Flatten:
    def __init__(self) -> None:
        self._shape: tuple[int, ...] | None = None

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out: np.ndarray) -> tuple[Grads, np.ndarray]:
        return {}, grad_out.reshape(self._shape)


def merge_grads(*grad_dicts: Grads) -> Grads:
    """Union of per-layer gradient dicts; duplicate names are summed."""
    out: Grads = {}
    for grads in grad_dicts:
        for name, g in grads.items():
            if name in out:
                out[name] = out[name] + g
            else:
                out[name] = g
    return out
