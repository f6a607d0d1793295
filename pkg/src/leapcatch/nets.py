"""Actor-critic networks with built-in reverse-mode differentiation.

Two actor backbones behind one interface: a GRU followed by a three-layer
perceptron ("recurrent"), and a plain three-layer perceptron
("memoryless").  The critic is a separate perceptron on the privileged
observation.  Gradients are exact reverse-mode, with truncated
backpropagation through time across rollout windows for the GRU; all math
is float64.

Checkpoint format (little-endian): magic ``LPCK``, u32 version, u8
backbone tag (0 memoryless / 1 recurrent), u32 obs_dim, act_dim,
hidden_size, mlp_width, u32 tensor count, then per tensor a u16
name length, utf-8 name, u8 ndim, u32 dims, and raw float64 data.
Round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"LPCK"
CHECKPOINT_VERSION = 1
_BACKBONE_TAGS = {"memoryless": 0, "recurrent": 1}
_TAG_BACKBONES = {v: k for k, v in _BACKBONE_TAGS.items()}

LOG2PI = np.log(2.0 * np.pi)


class Param:
    __slots__ = ("v", "g")

    def __init__(self, value: np.ndarray):
        self.v = np.asarray(value, dtype=np.float64)
        self.g = np.zeros_like(self.v)


def _init_weight(rng, fan_in, fan_out, scale=1.0):
    return rng.normal(0.0, scale / np.sqrt(fan_in), size=(fan_in, fan_out))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _elu(x):
    return np.where(x > 0.0, x, np.expm1(x))


def _elu_grad(x, y):
    return np.where(x > 0.0, 1.0, y + 1.0)


class Linear:
    def __init__(self, rng, n_in, n_out, scale=1.0):
        self.W = Param(_init_weight(rng, n_in, n_out, scale))
        self.b = Param(np.zeros(n_out))

    def forward(self, x):
        return x @ self.W.v + self.b.v, x

    def backward(self, dy, cache):
        x = cache
        self.W.g += x.T @ dy
        self.b.g += dy.sum(axis=0)
        return dy @ self.W.v.T

    def params(self, prefix):
        return [(f"{prefix}.W", self.W), (f"{prefix}.b", self.b)]


class MLP:
    """Affine layers with ELU between; linear final layer."""

    def __init__(self, rng, dims, out_scale=1.0):
        self.layers = []
        for i in range(len(dims) - 1):
            scale = out_scale if i == len(dims) - 2 else 1.0
            self.layers.append(Linear(rng, dims[i], dims[i + 1], scale))

    def forward(self, x):
        caches = []
        for i, layer in enumerate(self.layers):
            a, lin_cache = layer.forward(x)
            if i < len(self.layers) - 1:
                y = _elu(a)
                caches.append((lin_cache, a, y))
                x = y
            else:
                caches.append((lin_cache, None, None))
                x = a
        return x, caches

    def backward(self, dy, caches):
        for i in reversed(range(len(self.layers))):
            lin_cache = caches[i][0]
            dy = self.layers[i].backward(dy, lin_cache)
            if i > 0:
                prev_a, prev_y = caches[i - 1][1], caches[i - 1][2]
                dy = dy * _elu_grad(prev_a, prev_y)
        return dy

    def params(self, prefix):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend(layer.params(f"{prefix}.l{i}"))
        return out


class GRUCell:
    """z = sig(Wz [x,h] + bz); r = sig(Wr [x,h] + br);
    htil = tanh(Wh [x, r*h] + bh); h' = (1-z)*h + z*htil."""

    def __init__(self, rng, n_in, n_h):
        self.n_in = n_in
        self.n_h = n_h
        self.Wz = Param(_init_weight(rng, n_in + n_h, n_h))
        self.bz = Param(np.zeros(n_h))
        self.Wr = Param(_init_weight(rng, n_in + n_h, n_h))
        self.br = Param(np.zeros(n_h))
        self.Wh = Param(_init_weight(rng, n_in + n_h, n_h))
        self.bh = Param(np.zeros(n_h))

    def forward(self, x, h):
        xh = np.concatenate([x, h], axis=-1)
        z = _sigmoid(xh @ self.Wz.v + self.bz.v)
        r = _sigmoid(xh @ self.Wr.v + self.br.v)
        xrh = np.concatenate([x, r * h], axis=-1)
        htil = np.tanh(xrh @ self.Wh.v + self.bh.v)
        h_next = (1.0 - z) * h + z * htil
        return h_next, (xh, z, r, xrh, htil, h)

    def backward(self, dh_next, cache):
        xh, z, r, xrh, htil, h = cache
        n = self.n_in
        dz = dh_next * (htil - h)
        dhtil = dh_next * z
        dh = dh_next * (1.0 - z)
        da_h = dhtil * (1.0 - htil * htil)
        self.Wh.g += xrh.T @ da_h
        self.bh.g += da_h.sum(axis=0)
        dxrh = da_h @ self.Wh.v.T
        dx = dxrh[:, :n]
        d_rh = dxrh[:, n:]
        dr = d_rh * h
        dh += d_rh * r
        da_r = dr * r * (1.0 - r)
        self.Wr.g += xh.T @ da_r
        self.br.g += da_r.sum(axis=0)
        da_z = dz * z * (1.0 - z)
        self.Wz.g += xh.T @ da_z
        self.bz.g += da_z.sum(axis=0)
        dxh = da_r @ self.Wr.v.T + da_z @ self.Wz.v.T
        dx += dxh[:, :n]
        dh += dxh[:, n:]
        return dx, dh

    def params(self, prefix):
        return [(f"{prefix}.Wz", self.Wz), (f"{prefix}.bz", self.bz),
                (f"{prefix}.Wr", self.Wr), (f"{prefix}.br", self.br),
                (f"{prefix}.Wh", self.Wh), (f"{prefix}.bh", self.bh)]


class ActorCritic:
    """Diagonal-Gaussian actor plus value head.

    Actions are in network-output units; callers map them to joint targets
    around the nominal pose.  The critic always runs on the (privileged)
    observation it is given and is memoryless.
    """

    def __init__(self, obs_dim, act_dim, backbone="recurrent",
                 hidden_size=128, mlp_width=256, seed=0):
        if backbone not in _BACKBONE_TAGS:
            raise ValueError(f"unknown backbone {backbone!r}")
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.backbone = backbone
        self.hidden_size = hidden_size
        self.mlp_width = mlp_width
        rng = np.random.default_rng(seed)
        if backbone == "recurrent":
            self.gru = GRUCell(rng, obs_dim, hidden_size)
            head_in = hidden_size
        else:
            self.gru = None
            head_in = obs_dim
        self.actor = MLP(rng, [head_in, mlp_width, mlp_width, act_dim], out_scale=0.01)
        self.critic = MLP(rng, [obs_dim, mlp_width, mlp_width, 1], out_scale=1.0)
        self.log_std = Param(np.zeros(act_dim))

    # ---- parameter plumbing -------------------------------------------------

    def named_params(self):
        out = []
        if self.gru is not None:
            out.extend(self.gru.params("gru"))
        out.extend(self.actor.params("actor"))
        out.extend(self.critic.params("critic"))
        out.append(("log_std", self.log_std))
        return out

    def zero_grad(self):
        for _, p in self.named_params():
            p.g[...] = 0.0

    def num_params(self):
        return sum(p.v.size for _, p in self.named_params())

    # ---- inference ----------------------------------------------------------

    def initial_hidden(self, batch):
        h = self.hidden_size if self.backbone == "recurrent" else 0
        return np.zeros((batch, h))

    def actor_mean(self, obs, hidden):
        """Deterministic action mean and next hidden state (no caching)."""
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape[-1] != self.obs_dim:
            raise ValueError(
                f"observation dim {obs.shape[-1]} != network dim {self.obs_dim}")
        if self.backbone == "recurrent":
            h_next, _ = self.gru.forward(obs, hidden)
            mean, _ = self.actor.forward(h_next)
        else:
            h_next = hidden
            mean, _ = self.actor.forward(obs)
        return mean, h_next

    def value(self, priv_obs):
        v, _ = self.critic.forward(np.asarray(priv_obs, dtype=np.float64))
        return v[:, 0]

    def act(self, obs, hidden, priv_obs, rng=None, stochastic=True):
        """Returns (mean, action, log_prob, value, h_next)."""
        mean, h_next = self.actor_mean(obs, hidden)
        std = np.exp(self.log_std.v)
        if stochastic:
            if rng is None:
                raise ValueError("stochastic act requires an rng")
            action = mean + std * rng.standard_normal(mean.shape)
        else:
            action = mean.copy()
        logp = self.log_prob(action, mean)
        return mean, action, logp, self.value(priv_obs), h_next

    def log_prob(self, action, mean):
        std = np.exp(self.log_std.v)
        zscore = (action - mean) / std
        return (-0.5 * np.sum(zscore * zscore, axis=-1)
                - np.sum(self.log_std.v) - 0.5 * self.act_dim * LOG2PI)

    def entropy(self):
        return np.sum(self.log_std.v) + 0.5 * self.act_dim * (LOG2PI + 1.0)

    # ---- training-time differentiable evaluation ---------------------------

    def evaluate_sequence(self, obs_seq, h0, reset_masks, actions, priv_seq):
        """Recompute log-probs and values along a rollout window.

        obs_seq, priv_seq: (T, B, D); actions: (T, B, A); h0: (B, H);
        reset_masks: (T, B), 0 where the episode restarted before step t
        (hidden zeroed there).  Returns (logp (T,B), values (T,B), cache).
        """
        T, B, _ = obs_seq.shape
        h = np.asarray(h0, dtype=np.float64)
        gru_caches, masks = [], []
        if self.backbone == "recurrent":
            hs = np.empty((T, B, self.hidden_size))
            for t in range(T):
                m = reset_masks[t][:, None]
                h = h * m
                masks.append(m)
                h, gc = self.gru.forward(obs_seq[t], h)
                gru_caches.append(gc)
                hs[t] = h
            head_in = hs
        else:
            head_in = obs_seq
        # the actor head has no state, so the window runs as one batch
        mean_flat, head_cache = self.actor.forward(head_in.reshape(T * B, -1))
        means = mean_flat.reshape(T, B, -1)
        flat_priv = priv_seq.reshape(T * B, -1)
        v, critic_cache = self.critic.forward(flat_priv)
        values = v[:, 0].reshape(T, B)
        logp = self.log_prob(actions, means)
        cache = (obs_seq, actions, means, gru_caches, head_cache, masks,
                 critic_cache, T, B)
        return logp, values, cache

    def backward_sequence(self, cache, dlogp, dvalues):
        """Accumulate parameter gradients for the given output adjoints."""
        (obs_seq, actions, means, gru_caches, head_cache, masks,
         critic_cache, T, B) = cache
        std = np.exp(self.log_std.v)
        zscore = (actions - means) / std
        # d logp / d mean = z / std ; d logp / d log_std = z^2 - 1
        dmean = dlogp[..., None] * zscore / std
        self.log_std.g += np.sum(dlogp[..., None] * (zscore * zscore - 1.0),
                                 axis=(0, 1))
        dhead = self.actor.backward(dmean.reshape(T * B, -1), head_cache)
        if self.backbone == "recurrent":
            dhead = dhead.reshape(T, B, -1)
            dh = np.zeros((B, self.hidden_size))
            for t in reversed(range(T)):
                dh = dh + dhead[t]
                _, dh = self.gru.backward(dh, gru_caches[t])
                dh = dh * masks[t]
        dv = dvalues.reshape(T * B, 1)
        self.critic.backward(dv, critic_cache)

    # ---- checkpoint I/O -----------------------------------------------------

    def save(self, path):
        parts = [CHECKPOINT_MAGIC,
                 struct.pack("<IBIIII", CHECKPOINT_VERSION,
                             _BACKBONE_TAGS[self.backbone],
                             self.obs_dim, self.act_dim,
                             self.hidden_size, self.mlp_width)]
        named = self.named_params()
        parts.append(struct.pack("<I", len(named)))
        for name, p in named:
            nb = name.encode()
            parts.append(struct.pack("<H", len(nb)))
            parts.append(nb)
            parts.append(struct.pack("<B", p.v.ndim))
            parts.append(struct.pack(f"<{p.v.ndim}I", *p.v.shape))
            parts.append(np.ascontiguousarray(p.v, dtype="<f8").tobytes())
        Path(path).write_bytes(b"".join(parts))

    @classmethod
    def load(cls, path):
        blob = Path(path).read_bytes()
        if blob[:4] != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file: {path}")
        off = 4
        version, tag, obs_dim, act_dim, hidden, width = struct.unpack_from("<IBIIII", blob, off)
        off += struct.calcsize("<IBIIII")
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"checkpoint version {version} != {CHECKPOINT_VERSION}")
        net = cls(obs_dim, act_dim, backbone=_TAG_BACKBONES[tag],
                  hidden_size=hidden, mlp_width=width, seed=0)
        (count,) = struct.unpack_from("<I", blob, off)
        off += 4
        by_name = dict(net.named_params())
        if count != len(by_name):
            raise ValueError("checkpoint tensor count mismatch")
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off:off + nlen].decode()
            off += nlen
            (ndim,) = struct.unpack_from("<B", blob, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, off)
            off += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(blob, dtype="<f8", count=size, offset=off)
            off += 8 * size
            if name not in by_name or by_name[name].v.shape != tuple(shape):
                raise ValueError(f"checkpoint tensor {name} has unexpected shape {shape}")
            by_name[name].v[...] = data.reshape(shape)
        return net


class Adam:
    """Adam over the network's parameter list."""

    def __init__(self, net: ActorCritic, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.net = net
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.v) for _, p in net.named_params()]
        self.u = [np.zeros_like(p.v) for _, p in net.named_params()]

    def step(self, max_grad_norm=None):
        params = self.net.named_params()
        if max_grad_norm is not None:
            total = np.sqrt(sum(float(np.sum(p.g * p.g)) for _, p in params))
            if total > max_grad_norm:
                scale = max_grad_norm / (total + 1e-12)
                for _, p in params:
                    p.g *= scale
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for i, (_, p) in enumerate(params):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * p.g
            self.u[i] = self.beta2 * self.u[i] + (1.0 - self.beta2) * p.g * p.g
            p.v -= self.lr * (self.m[i] / bc1) / (np.sqrt(self.u[i] / bc2) + self.eps)
