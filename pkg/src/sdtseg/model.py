"""Toy 3D encoder-decoder trained to regress signed distance volumes.

The network is a U-shaped stack: two 3x3x3 conv+ReLU blocks per level,
max-pool descents, transposed-conv ascents with skip concatenation, and a
linear 1x1x1 head with no output activation, since the regression target
is real-valued on both sides of zero. Channel count doubles per level.

Everything runs in numpy float64 on the CPU; forward and backward are
explicit so gradients can be audited against finite differences.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field, replace

import numpy as np

from . import ops3d
from .errors import ConfigError, DegenerateInputError, GeometryError, TrainingDivergedError
from .loss import LossConfig, sdt_loss
from .metrics import dice
from .morphology import fill_holes, largest_component
from .sdt import SDTVolume, threshold_to_mask
from .volume import Volume, downsample2, normalize_intensities, upsample2_trilinear

CHECKPOINT_FORMAT = "sdtseg-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    depth: int = 2
    start_channels: int = 4
    seed: int = 0
    kernel: int = 3  # fixed; conv blocks are 3x3x3

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.start_channels < 1:
            raise ConfigError(f"start_channels must be >= 1, got {self.start_channels}")
        if self.kernel != 3:
            raise ConfigError("conv kernel is fixed at 3")


def _layer_plan(cfg: NetConfig):
    """Yield (name, kind, in_ch, out_ch) in parameter order."""
    c = cfg.start_channels
    plan = []
    for i in range(cfg.depth):
        cin = 1 if i == 0 else c * 2 ** (i - 1)
        cout = c * 2 ** i
        plan.append((f"enc{i}a", "conv3", cin, cout))
        plan.append((f"enc{i}b", "conv3", cout, cout))
    cb = c * 2 ** cfg.depth
    plan.append(("mida", "conv3", cb // 2, cb))
    plan.append(("midb", "conv3", cb, cb))
    for i in reversed(range(cfg.depth)):
        cout = c * 2 ** i
        plan.append((f"dec{i}up", "tconv2", cout * 2, cout))
        plan.append((f"dec{i}a", "conv3", cout * 2, cout))
        plan.append((f"dec{i}b", "conv3", cout, cout))
    plan.append(("head", "conv1", c, 1))
    return plan


_SHAPES = {
    "conv3": lambda cin, cout: (cout, cin, 3, 3, 3),
    "tconv2": lambda cin, cout: (cin, cout, 2, 2, 2),
    "conv1": lambda cin, cout: (cout, cin),
}
_FAN_IN = {"conv3": 27, "tconv2": 8, "conv1": 1}


def init_params(cfg: NetConfig) -> dict[str, np.ndarray]:
    """He-normal weights, zero biases, deterministic under cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    params: dict[str, np.ndarray] = {}
    for name, kind, cin, cout in _layer_plan(cfg):
        shape = _SHAPES[kind](cin, cout)
        std = np.sqrt(2.0 / (cin * _FAN_IN[kind]))
        params[f"{name}.w"] = rng.normal(0.0, std, size=shape)
        params[f"{name}.b"] = np.zeros(cout if kind != "tconv2" else shape[1])
    return params


def param_count(cfg: NetConfig) -> int:
    return sum(int(np.prod(_SHAPES[k](ci, co))) + (co)
               for _, k, ci, co in _layer_plan(cfg))


def validate_params(cfg: NetConfig, params: dict[str, np.ndarray]) -> None:
    expected = init_params(replace(cfg, seed=0))
    if set(params) != set(expected):
        raise ConfigError("parameter names do not match the configured architecture")
    for k, v in expected.items():
        if params[k].shape != v.shape:
            raise ConfigError(f"tensor {k} has shape {params[k].shape}, expected {v.shape}")
        if not np.isfinite(params[k]).all():
            raise ConfigError(f"tensor {k} contains non-finite values")


def _conv_block(x, params, name, caches):
    z, c1 = ops3d.conv3x3_forward(x, params[f"{name}.w"], params[f"{name}.b"])
    a, c2 = ops3d.relu_forward(z)
    caches[name] = (c1, c2)
    return a


def _conv_block_back(dout, params, name, caches, grads):
    c1, c2 = caches[name]
    dz = ops3d.relu_backward(dout, c2)
    dx, dw, db = ops3d.conv3x3_backward(dz, c1)
    grads[f"{name}.w"] = grads.get(f"{name}.w", 0) + dw
    grads[f"{name}.b"] = grads.get(f"{name}.b", 0) + db
    return dx


def _forward_grid(cfg: NetConfig, params: dict, grid: np.ndarray):
    """Run the network on a (D, H, W) grid; returns (out_grid, caches)."""
    d, h, w = grid.shape
    div = 2 ** cfg.depth
    if d % div or h % div or w % div:
        raise GeometryError(
            f"spatial dims {(w, h, d)} not divisible by 2^depth={div}; pad the input"
        )
    caches: dict = {}
    x = grid[None].astype(np.float64)
    skips = []
    for i in range(cfg.depth):
        x = _conv_block(x, params, f"enc{i}a", caches)
        x = _conv_block(x, params, f"enc{i}b", caches)
        skips.append(x)
        x, caches[f"pool{i}"] = ops3d.maxpool2_forward(x)
    x = _conv_block(x, params, "mida", caches)
    x = _conv_block(x, params, "midb", caches)
    for i in reversed(range(cfg.depth)):
        x, caches[f"dec{i}up"] = ops3d.convtranspose2_forward(
            x, params[f"dec{i}up.w"], params[f"dec{i}up.b"])
        x = np.concatenate([skips[i], x], axis=0)
        caches[f"cat{i}"] = skips[i].shape[0]
        x = _conv_block(x, params, f"dec{i}a", caches)
        x = _conv_block(x, params, f"dec{i}b", caches)
    out, caches["head"] = ops3d.conv1x1_forward(x, params["head.w"], params["head.b"])
    return out[0], caches


def _backward_grid(cfg: NetConfig, params: dict, caches: dict,
                   dout_grid: np.ndarray) -> dict[str, np.ndarray]:
    grads: dict[str, np.ndarray] = {}
    dx, dw, db = ops3d.conv1x1_backward(dout_grid[None], caches["head"], params["head.w"])
    grads["head.w"] = dw
    grads["head.b"] = db
    dskips = {}
    for i in range(cfg.depth):
        dx = _conv_block_back(dx, params, f"dec{i}b", caches, grads)
        dx = _conv_block_back(dx, params, f"dec{i}a", caches, grads)
        nskip = caches[f"cat{i}"]
        dskips[i] = dx[:nskip]
        dx = dx[nskip:]
        dx, dw, db = ops3d.convtranspose2_backward(dx, caches[f"dec{i}up"])
        grads[f"dec{i}up.w"] = dw
        grads[f"dec{i}up.b"] = db
    dx = _conv_block_back(dx, params, "midb", caches, grads)
    dx = _conv_block_back(dx, params, "mida", caches, grads)
    for i in reversed(range(cfg.depth)):
        dx = ops3d.maxpool2_backward(dx, caches[f"pool{i}"])
        dx = dx + dskips[i]
        dx = _conv_block_back(dx, params, f"enc{i}b", caches, grads)
        dx = _conv_block_back(dx, params, f"enc{i}a", caches, grads)
    return grads


def forward(cfg: NetConfig, params: dict, vol: Volume) -> SDTVolume:
    """Predict a signed distance volume for a normalized intensity volume."""
    out, _ = _forward_grid(cfg, params, vol.grid)
    return SDTVolume(out.ravel(), vol.shape, vol.spacing, vol.affine)


def backward(cfg: NetConfig, params: dict, vol: Volume,
             grad_wrt_output: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients for a given output gradient (flat or grid)."""
    out, caches = _forward_grid(cfg, params, vol.grid)
    g = np.asarray(grad_wrt_output, dtype=np.float64)
    if g.size != out.size:
        raise GeometryError(f"output gradient has {g.size} values, expected {out.size}")
    return _backward_grid(cfg, params, caches, g.reshape(out.shape))


@dataclass
class TrainState:
    config: NetConfig
    params: dict[str, np.ndarray]
    opt_m: dict[str, np.ndarray]
    opt_v: dict[str, np.ndarray]
    opt_t: int = 0
    epoch: int = 0
    best_validation_dice: float = -1.0
    best_params: dict[str, np.ndarray] | None = None
    rng_state: dict | None = None
    history: list = field(default_factory=list)


def _adam_step(state: TrainState, grads: dict, lr: float,
               beta1=0.9, beta2=0.999, eps=1e-8) -> None:
    state.opt_t += 1
    t = state.opt_t
    for k, g in grads.items():
        m = state.opt_m[k] = beta1 * state.opt_m[k] + (1 - beta1) * g
        v = state.opt_v[k] = beta2 * state.opt_v[k] + (1 - beta2) * g * g
        mhat = m / (1 - beta1 ** t)
        vhat = v / (1 - beta2 ** t)
        state.params[k] = state.params[k] - lr * mhat / (np.sqrt(vhat) + eps)


def train(cfg: NetConfig, dataset, loss_cfg: LossConfig = LossConfig(),
          epochs: int = 100, lr: float = 1e-3, batch_size: int = 2,
          val_dataset=None, log_fn=None) -> TrainState:
    """Mini-batch Adam on (intensity Volume, target SDTVolume) pairs.

    Logs per-epoch training loss and validation Dice (predictions and
    targets thresholded at zero) and keeps the parameters of the best
    validation epoch. Without an explicit validation set the training
    pairs double as validation.
    """
    dataset = list(dataset)
    if not dataset:
        raise DegenerateInputError("empty training dataset")
    val_dataset = list(val_dataset) if val_dataset is not None else dataset

    params = init_params(cfg)
    state = TrainState(
        config=cfg,
        params=params,
        opt_m={k: np.zeros_like(v) for k, v in params.items()},
        opt_v={k: np.zeros_like(v) for k, v in params.items()},
    )
    rng = np.random.default_rng(cfg.seed + 1)

    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(dataset))
        epoch_losses = []
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            grads_sum: dict[str, np.ndarray] = {}
            for idx in batch:
                img, target = dataset[idx]
                out, caches = _forward_grid(cfg, state.params, img.grid)
                pred = SDTVolume(out.ravel(), img.shape, img.spacing)
                report = sdt_loss(target, pred, loss_cfg, want_gradient=True)
                if not np.isfinite(report.value):
                    raise TrainingDivergedError(
                        f"non-finite loss at epoch {epoch}, sample {idx}: {report.value}"
                    )
                epoch_losses.append(report.value)
                g = _backward_grid(cfg, state.params, caches,
                                   report.gradient.reshape(out.shape))
                for k, v in g.items():
                    grads_sum[k] = grads_sum.get(k, 0) + v
            grads = {k: v / len(batch) for k, v in grads_sum.items()}
            _adam_step(state, grads, lr)

        val_dice = _validation_dice(cfg, state.params, val_dataset)
        state.epoch = epoch
        if val_dice > state.best_validation_dice:
            state.best_validation_dice = val_dice
            state.best_params = {k: v.copy() for k, v in state.params.items()}
        row = {"epoch": epoch, "train_loss": float(np.mean(epoch_losses)),
               "val_dice": val_dice, "best_val_dice": state.best_validation_dice}
        state.history.append(row)
        if log_fn is not None:
            log_fn(row)

    state.rng_state = rng.bit_generator.state
    return state


def _validation_dice(cfg, params, pairs) -> float:
    scores = []
    for img, target in pairs:
        pred = forward(cfg, params, img)
        scores.append(dice(threshold_to_mask(pred, 0.0),
                           threshold_to_mask(target, 0.0)))
    return float(np.mean(scores))


def infer(state: TrainState, vol: Volume, tau: float = 0.0):
    """Full-resolution inference chain.

    normalize -> halve resolution -> network -> trilinear upsample back to
    the original grid -> threshold at tau -> keep largest component ->
    fill holes.
    """
    params = state.best_params if state.best_params is not None else state.params
    low = downsample2(normalize_intensities(vol))
    pred = forward(state.config, params, low)
    up = upsample2_trilinear(pred.to_volume(), vol.shape)
    mask = threshold_to_mask(up, tau)
    mask = largest_component(mask)
    return fill_holes(mask)


def save_checkpoint(state: TrainState, path) -> None:
    """Write a versioned, byte-deterministic checkpoint archive.

    Layout is an uncompressed zip of .npy members (np.load-compatible)
    plus a meta.json; timestamps are pinned so identical states produce
    identical files.
    """
    params = state.best_params if state.best_params is not None else state.params
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": {"depth": state.config.depth,
                   "start_channels": state.config.start_channels,
                   "seed": state.config.seed},
        "epoch": state.epoch,
        "opt_t": state.opt_t,
        "best_validation_dice": state.best_validation_dice,
        "rng_state": _jsonable(state.rng_state),
    }
    members = [("meta.json", json.dumps(meta, sort_keys=True).encode())]
    for k in sorted(params):
        members.append((f"params/{k}.npy", _npy_bytes(params[k].astype(np.float32))))
    for k in sorted(state.opt_m):
        members.append((f"opt_m/{k}.npy", _npy_bytes(state.opt_m[k].astype(np.float32))))
        members.append((f"opt_v/{k}.npy", _npy_bytes(state.opt_v[k].astype(np.float32))))
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, blob in members:
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, blob)


def load_checkpoint(path) -> TrainState:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ConfigError(f"{path}: not a {CHECKPOINT_FORMAT} file")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        cfg = NetConfig(**meta["config"])
        params, opt_m, opt_v = {}, {}, {}
        for name in zf.namelist():
            if not name.endswith(".npy"):
                continue
            area, key = name.split("/", 1)
            arr = np.load(io.BytesIO(zf.read(name))).astype(np.float64)
            {"params": params, "opt_m": opt_m, "opt_v": opt_v}[area][key[:-4]] = arr
    validate_params(cfg, params)
    state = TrainState(config=cfg, params=params, opt_m=opt_m, opt_v=opt_v,
                       opt_t=meta["opt_t"], epoch=meta["epoch"],
                       best_validation_dice=meta["best_validation_dice"],
                       best_params=params, rng_state=meta.get("rng_state"))
    return state


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, arr)
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
