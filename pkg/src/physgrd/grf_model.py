"""Temporal-convolution force predictor trained with a composite loss.

The network is four 1D temporal convolutions (kernel 7, zero-padded to
preserve length) followed by three frame-wise fully-connected layers, with
an ELU after every convolution and after the first two FC layers. It maps
per-frame feature vectors to per-foot 3D reaction forces in body-weight
units (output width 6 = 2 feet x 3 components).

The training objective combines a force-plate term (masked frames skipped,
renormalized per window) and a physics-consistency term tying the summed
two-foot prediction to the PD reaction force computed from the trajectory.
All gradients are analytic and checked against central finite differences
in the test suite.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dynamics import GravitySpec, PDGains, SimMode, physics_force_series
from .errors import CheckpointError, ValidationError
from .metrics import evaluate_prediction
from .motion_data import Dataset, ForcePlateRecord, _fmt

KERNEL = 7
PAD = KERNEL // 2
OUT_WIDTH = 6  # two feet x three force components
CHECKPOINT_VERSION = 1


def elu(x):
    """ELU with alpha = 1: x for x > 0, exp(x) - 1 otherwise."""
    arr = np.asarray(x, dtype=float)
    out = np.where(arr > 0, arr, np.expm1(np.minimum(arr, 0.0)))
    return float(out) if out.ndim == 0 else out


def _elu_grad(pre: np.ndarray) -> np.ndarray:
    return np.where(pre > 0, 1.0, np.exp(np.minimum(pre, 0.0)))


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; channel widths beyond the canonical plan
    exist so tests and demos can run at desk scale."""

    epochs: int = 11
    batch_size: int = 64
    learning_rate: float = 3e-5
    seed: int = 42
    lambda1: float = 0.002
    lambda2: float = 0.005
    window_len: int = 240
    conv_channels: tuple[int, ...] = (128, 128, 128, 128)
    fc_widths: tuple[int, ...] = (64, 32)

    def __post_init__(self):
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        object.__setattr__(self, "fc_widths", tuple(int(w) for w in self.fc_widths))
        if self.epochs <= 0 or self.batch_size <= 0 or self.window_len <= 0:
            raise ValidationError("epochs, batch_size and window_len must be positive")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValidationError("loss weights must be non-negative")
        if len(self.conv_channels) != 4:
            raise ValidationError("the network has exactly four conv layers")
        if len(self.fc_widths) != 2:
            raise ValidationError("the network has exactly three FC layers (two hidden widths)")
        if any(c <= 0 for c in self.conv_channels) or any(w <= 0 for w in self.fc_widths):
            raise ValidationError("layer widths must be positive")


@dataclass(frozen=True)
class Prediction:
    """Per-frame per-foot force prediction, (T, 2, 3), body weights."""

    forces: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.forces, dtype=float)
        if f.ndim != 3 or f.shape[1:] != (2, 3):
            raise ValidationError(f"prediction must be (T, 2, 3), got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValidationError("non-finite value in prediction")
        f = np.ascontiguousarray(f)
        f.flags.writeable = False
        object.__setattr__(self, "forces", f)

    def __len__(self) -> int:
        return len(self.forces)

    def total(self) -> np.ndarray:
        return self.forces.sum(axis=1)


class TemporalConvNet:
    """4 x conv(kernel 7, same padding) -> 3 x frame-wise FC, ELU inside.

    Weights initialize uniform in +-sqrt(1/fan_in) from the given seed;
    biases start at zero.
    """

    def __init__(
        self,
        input_width: int,
        conv_channels: Sequence[int] = (128, 128, 128, 128),
        fc_widths: Sequence[int] = (64, 32),
        seed: int = 0,
    ):
        if input_width < 1:
            raise ValidationError(f"input width must be >= 1, got {input_width}")
        if len(conv_channels) != 4 or len(fc_widths) != 2:
            raise ValidationError("architecture is fixed at four conv and three FC layers")
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x6E7)))
        self.input_width = int(input_width)
        self.conv_channels = tuple(int(c) for c in conv_channels)
        self.fc_widths = tuple(int(w) for w in fc_widths)

        self.conv: list[list[np.ndarray]] = []
        in_ch = self.input_width
        for out_ch in self.conv_channels:
            limit = math.sqrt(1.0 / (in_ch * KERNEL))
            w = rng.uniform(-limit, limit, size=(out_ch, in_ch, KERNEL))
            self.conv.append([w, np.zeros(out_ch)])
            in_ch = out_ch
        self.fc: list[list[np.ndarray]] = []
        for out_w in (*self.fc_widths, OUT_WIDTH):
            limit = math.sqrt(1.0 / in_ch)
            w = rng.uniform(-limit, limit, size=(out_w, in_ch))
            self.fc.append([w, np.zeros(out_w)])
            in_ch = out_w

    def parameters(self) -> list[np.ndarray]:
        """All trainable arrays in a fixed order (conv then FC, W then b)."""
        out: list[np.ndarray] = []
        for w, b in self.conv + self.fc:
            out += [w, b]
        return out

    def _forward(self, x: np.ndarray, want_cache: bool = False):
        if x.ndim != 3 or x.shape[2] != self.input_width:
            raise ValidationError(
                f"expected input (B, T, {self.input_width}), got {x.shape}"
            )
        cache = {"conv": [], "fc": []} if want_cache else None
        h = x
        for w, b in self.conv:
            hp = np.pad(h, ((0, 0), (PAD, PAD), (0, 0)))
            win = sliding_window_view(hp, KERNEL, axis=1)  # (B, T, C_in, K)
            pre = np.einsum("btck,ock->bto", win, w, optimize=True) + b
            if want_cache:
                cache["conv"].append((win, pre))
            h = elu(pre)
        n_fc = len(self.fc)
        for i, (w, b) in enumerate(self.fc):
            pre = h @ w.T + b
            if want_cache:
                cache["fc"].append((h, pre))
            h = pre if i == n_fc - 1 else elu(pre)
        return h, cache

    def _backward(self, dout: np.ndarray, cache) -> list[np.ndarray]:
        """Gradients w.r.t. every parameter, aligned with parameters().

        dout is dLoss/d(final pre-activation), (B, T, 6); all loss
        normalization is already folded into it.
        """
        T = dout.shape[1]
        fc_grads: list[list[np.ndarray]] = [None] * len(self.fc)
        g = dout
        for i in reversed(range(len(self.fc))):
            w, _ = self.fc[i]
            h_in, _ = cache["fc"][i]
            fc_grads[i] = [
                np.einsum("bto,bti->oi", g, h_in, optimize=True),
                g.sum(axis=(0, 1)),
            ]
            g = g @ w  # gradient at this layer's input
            if i > 0:
                g = g * _elu_grad(cache["fc"][i - 1][1])

        conv_grads: list[list[np.ndarray]] = [None] * len(self.conv)
        g = g * _elu_grad(cache["conv"][-1][1])  # through the last conv's ELU
        for i in reversed(range(len(self.conv))):
            w, _ = self.conv[i]
            win, _ = cache["conv"][i]
            conv_grads[i] = [
                np.einsum("bto,btck->ock", g, win, optimize=True),
                g.sum(axis=(0, 1)),
            ]
            if i > 0:
                gp = np.pad(g, ((0, 0), (KERNEL - 1, KERNEL - 1), (0, 0)))
                gw = sliding_window_view(gp, KERNEL, axis=1)  # (B, T+K-1, C_out, K)
                dxpad = np.einsum("btok,ock->btc", gw, w[:, :, ::-1], optimize=True)
                dx = dxpad[:, PAD:PAD + T]
                g = dx * _elu_grad(cache["conv"][i - 1][1])

        flat: list[np.ndarray] = []
        for dw, db in conv_grads + fc_grads:
            flat += [dw, db]
        return flat

    def forward(self, features: np.ndarray) -> Prediction:
        """Predict per-foot forces for one clip's (T, D) feature matrix."""
        features = np.asarray(features, dtype=float)
        if features.ndim != 2:
            raise ValidationError(f"features must be (T, D), got {features.shape}")
        out, _ = self._forward(features[None])
        T = len(features)
        return Prediction(forces=out[0].reshape(T, 2, 3))

    def loss_and_grads(
        self,
        features: np.ndarray,
        plate_force: np.ndarray,
        valid: np.ndarray,
        phys_bw: np.ndarray,
        lambda1: float,
        lambda2: float,
    ):
        """Composite loss over a batch of windows plus analytic gradients.

        features (B, T, D); plate_force (B, T, 2, 3) with NaN allowed at
        invalid frames; valid (B, T) bool; phys_bw (B, T, 3). Returns
        (loss, term1, term2, grads) with terms averaged over the batch.
        """
        out, cache = self._forward(features, want_cache=True)
        B, T = out.shape[:2]
        pred = out.reshape(B, T, 2, 3)
        term1, term2, dpred = _loss_terms(
            pred, plate_force, valid, phys_bw, lambda1, lambda2, want_grad=True
        )
        grads = self._backward(dpred.reshape(B, T, OUT_WIDTH), cache)
        return float(term1 + term2), float(term1), float(term2), grads


def _loss_terms(
    pred: np.ndarray,
    plate_force: np.ndarray,
    valid: np.ndarray,
    phys_bw: np.ndarray,
    lambda1: float,
    lambda2: float,
    want_grad: bool = False,
):
    """Both composite-loss terms, averaged over the leading batch axis.

    Invalid frames are dropped from the plate term by boolean masking (their
    stored values are never touched, so NaN placeholders cannot leak) and
    the term renormalizes by each window's valid-frame count. The physics
    term uses every frame.
    """
    B, T = pred.shape[:2]
    valid = np.asarray(valid, dtype=bool)
    mask = valid[:, :, None, None]
    plate_safe = np.where(mask, plate_force, 0.0)
    diff1 = (pred - plate_safe) * mask
    counts = valid.sum(axis=1).astype(float)
    w1 = np.zeros(B)
    has_valid = counts > 0
    w1[has_valid] = lambda1 / counts[has_valid]
    term1 = float(((diff1**2).sum(axis=(1, 2, 3)) * w1).mean())

    diff2 = pred.sum(axis=2) - phys_bw
    term2 = float(((diff2**2).sum(axis=(1, 2)) * (lambda2 / T)).mean())

    if not want_grad:
        return term1, term2, None
    dpred = diff1 * (2.0 * w1 / B)[:, None, None, None]
    dpred = dpred + (diff2 * (2.0 * lambda2 / (T * B)))[:, :, None, :]
    return term1, term2, dpred


def composite_loss(
    pred: Prediction | np.ndarray,
    plate: ForcePlateRecord,
    phys_force_bw: np.ndarray,
    cfg: TrainConfig,
) -> float:
    """Composite objective for one clip; every force input in body weights.

    The physics series from the dynamics module is mass-normalized
    (acceleration units) and must be divided by the gravity magnitude
    before it gets here; train() does that conversion.
    """
    pred = np.asarray(getattr(pred, "forces", pred), dtype=float)
    phys = np.asarray(phys_force_bw, dtype=float)
    if not (len(pred) == len(plate) == len(phys)):
        raise ValidationError(
            f"misaligned lengths: pred {len(pred)}, plate {len(plate)}, phys {len(phys)}"
        )
    t1, t2, _ = _loss_terms(
        pred[None],
        plate.per_foot_force[None],
        plate.valid_mask[None],
        phys[None],
        cfg.lambda1,
        cfg.lambda2,
    )
    return float(t1 + t2)


class Adam:
    """Adam with bias correction; updates parameters in place."""

    def __init__(self, params: Sequence[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            p -= self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)


@dataclass(frozen=True)
class TrainLogRow:
    epoch: int
    train_loss: float
    term1: float
    term2: float
    test_vgrf_l: float
    test_vgrf_r: float
    test_vrpe: float


def write_train_log(log: Sequence[TrainLogRow], path: str | Path) -> None:
    lines = ["epoch,train_loss,term1,term2,test_vgrf_l,test_vgrf_r,test_vrpe"]
    for row in log:
        lines.append(
            ",".join(
                [str(row.epoch)]
                + [_fmt(v) for v in (row.train_loss, row.term1, row.term2,
                                     row.test_vgrf_l, row.test_vgrf_r, row.test_vrpe)]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def train(
    dataset: Dataset,
    cfg: TrainConfig,
    split: tuple[Sequence[str], str],
    gains: PDGains = PDGains(70.0, 3.0),
    gravity: GravitySpec | None = None,
    mode: SimMode = "closed_loop",
) -> tuple[TemporalConvNet, list[TrainLogRow]]:
    """Train on the given subjects and evaluate each epoch on the held-out one.

    Windows of cfg.window_len frames are drawn at seeded random offsets each
    epoch (clips shorter than the window contribute themselves whole) and
    optimized with Adam. The physics supervision series is computed once per
    clip with the given gains and converted to body weights. The whole run
    is a pure function of (dataset, cfg, split, gains, gravity, mode).
    """
    gravity = gravity or GravitySpec()
    train_subjects, test_subject = split
    train_keep = set(train_subjects)
    train_set = [e for e in dataset if e.clip.subject_id in train_keep and e.plate is not None]
    if not train_set:
        raise ValidationError("empty training set (no clips with plate data)")
    test_set = [e for e in dataset if e.clip.subject_id == test_subject]

    widths = {e.clip.feature_width for e in list(train_set) + list(test_set)}
    if len(widths) != 1:
        raise ValidationError(f"inconsistent feature widths across clips: {sorted(widths)}")
    D = widths.pop()

    g_mag = gravity.magnitude
    prepared = []
    for e in train_set:
        phys_bw = physics_force_series(e.clip, gains, gravity, mode) / g_mag
        prepared.append(
            (e.clip.features, e.plate.per_foot_force, e.plate.valid_mask, phys_bw)
        )

    net = TemporalConvNet(D, cfg.conv_channels, cfg.fc_widths, seed=cfg.seed)
    adam = Adam(net.parameters(), cfg.learning_rate)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))

    log: list[TrainLogRow] = []
    for epoch in range(1, cfg.epochs + 1):
        windows: list[tuple[int, int, int]] = []
        for ci, (feat, _, _, _) in enumerate(prepared):
            T = len(feat)
            wl = min(cfg.window_len, T)
            n_win = max(1, int(round(T / cfg.window_len)))
            offsets = rng.integers(0, T - wl + 1, size=n_win)
            windows += [(ci, int(o), wl) for o in offsets]
        order = rng.permutation(len(windows))
        windows = [windows[i] for i in order]
        by_len: dict[int, list[tuple[int, int, int]]] = {}
        for wdw in windows:
            by_len.setdefault(wdw[2], []).append(wdw)

        sums = np.zeros(3)
        n_seen = 0
        for wl in sorted(by_len):
            group = by_len[wl]
            for start in range(0, len(group), cfg.batch_size):
                chunk = group[start:start + cfg.batch_size]
                feats = np.stack([prepared[ci][0][o:o + wl] for ci, o, _ in chunk])
                plate = np.stack([prepared[ci][1][o:o + wl] for ci, o, _ in chunk])
                valid = np.stack([prepared[ci][2][o:o + wl] for ci, o, _ in chunk])
                phys = np.stack([prepared[ci][3][o:o + wl] for ci, o, _ in chunk])
                loss, t1, t2, grads = net.loss_and_grads(
                    feats, plate, valid, phys, cfg.lambda1, cfg.lambda2
                )
                adam.step(net.parameters(), grads)
                sums += np.array([loss, t1, t2]) * len(chunk)
                n_seen += len(chunk)
        train_loss, term1, term2 = (sums / max(n_seen, 1)).tolist()

        if test_set:
            scores = np.array(
                [
                    evaluate_prediction(e.clip, e.plate, net.forward(e.clip.features).forces, gravity)
                    for e in test_set
                ]
            )
            vgrf_l, vgrf_r, test_vrpe = scores.mean(axis=0).tolist()
        else:
            vgrf_l = vgrf_r = test_vrpe = float("nan")
        log.append(
            TrainLogRow(epoch, train_loss, term1, term2, vgrf_l, vgrf_r, test_vrpe)
        )
    return net, log


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _encode(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _decode(text: str, shape: tuple[int, ...]) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(text), dtype="<f8")
    if raw.size != int(np.prod(shape)):
        raise CheckpointError(f"parameter blob has {raw.size} values, expected {shape}")
    return raw.reshape(shape).copy()


def save_checkpoint(net: TemporalConvNet, cfg: TrainConfig, path: str | Path) -> None:
    """Versioned JSON container; parameters as little-endian float64 blobs."""
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "input_width": net.input_width,
        "conv_channels": list(net.conv_channels),
        "fc_widths": list(net.fc_widths),
        "train_config": {
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "learning_rate": cfg.learning_rate,
            "seed": cfg.seed,
            "lambda1": cfg.lambda1,
            "lambda2": cfg.lambda2,
            "window_len": cfg.window_len,
            "conv_channels": list(cfg.conv_channels),
            "fc_widths": list(cfg.fc_widths),
        },
        "conv_layers": [{"weights": _encode(w), "bias": _encode(b)} for w, b in net.conv],
        "fc_layers": [{"weights": _encode(w), "bias": _encode(b)} for w, b in net.fc],
        # choices the architecture text leaves open, recorded for reproducibility
        "notes": {
            "optimizer": "adam(beta1=0.9, beta2=0.999, eps=1e-8)",
            "padding": "zero, same-length",
            "init": "weights uniform(+-sqrt(1/fan_in)), biases zero",
            "activation": "elu after every conv and the first two fc layers",
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> tuple[TemporalConvNet, TrainConfig]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from None
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {version!r} is not supported (expected {CHECKPOINT_VERSION})"
        )
    tc = doc["train_config"]
    cfg = TrainConfig(
        epochs=tc["epochs"],
        batch_size=tc["batch_size"],
        learning_rate=tc["learning_rate"],
        seed=tc["seed"],
        lambda1=tc["lambda1"],
        lambda2=tc["lambda2"],
        window_len=tc["window_len"],
        conv_channels=tuple(tc["conv_channels"]),
        fc_widths=tuple(tc["fc_widths"]),
    )
    net = TemporalConvNet(
        doc["input_width"], tuple(doc["conv_channels"]), tuple(doc["fc_widths"]), seed=0
    )
    in_ch = net.input_width
    for layer, blob in zip(net.conv, doc["conv_layers"]):
        out_ch = layer[0].shape[0]
        layer[0] = _decode(blob["weights"], (out_ch, in_ch, KERNEL))
        layer[1] = _decode(blob["bias"], (out_ch,))
        in_ch = out_ch
    for layer, blob in zip(net.fc, doc["fc_layers"]):
        out_w = layer[0].shape[0]
        layer[0] = _decode(blob["weights"], (out_w, in_ch))
        layer[1] = _decode(blob["bias"], (out_w,))
        in_ch = out_w
    return net, cfg


def write_prediction_csv(pred: Prediction, path: str | Path, frame_rate: float) -> None:
    """Per-frame per-foot body-weight forces: t,L_fx..L_fz,R_fx..R_fz."""
    lines = ["t,L_fx,L_fy,L_fz,R_fx,R_fy,R_fz"]
    for i in range(len(pred)):
        cells = [_fmt(i / frame_rate)]
        cells += [_fmt(v) for v in pred.forces[i, 0]]
        cells += [_fmt(v) for v in pred.forces[i, 1]]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def load_prediction_csv(path: str | Path) -> Prediction:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != "t,L_fx,L_fy,L_fz,R_fx,R_fy,R_fz":
        raise ValidationError(f"{path}: not a prediction file")
    rows = [[float(c) for c in line.split(",")] for line in lines[1:] if line.strip()]
    data = np.array(rows, dtype=float)
    return Prediction(forces=data[:, 1:7].reshape(len(data), 2, 3))


def gradient_check(
    net: TemporalConvNet,
    features: np.ndarray,
    plate_force: np.ndarray,
    valid: np.ndarray,
    phys_bw: np.ndarray,
    lambda1: float = 1.0,
    lambda2: float = 1.0,
    step: float = 1e-6,
) -> np.ndarray:
    """Relative error of every analytic gradient entry against central
    finite differences of the composite loss. Returns a flat array, one
    value per parameter entry."""

    def loss_only() -> float:
        out, _ = net._forward(features)
        B, T = out.shape[:2]
        t1, t2, _ = _loss_terms(
            out.reshape(B, T, 2, 3), plate_force, valid, phys_bw, lambda1, lambda2
        )
        return t1 + t2

    _, _, _, grads = net.loss_and_grads(
        features, plate_force, valid, phys_bw, lambda1, lambda2
    )
    errs: list[float] = []
    for p, g in zip(net.parameters(), grads):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + step
            up = loss_only()
            flat_p[i] = orig - step
            down = loss_only()
            flat_p[i] = orig
            numeric = (up - down) / (2.0 * step)
            # floor keeps finite-difference roundoff on near-zero gradients
            # from registering as disagreement
            denom = max(abs(numeric) + abs(flat_g[i]), 1e-5)
            errs.append(abs(numeric - flat_g[i]) / denom)
    return np.array(errs)
