"""Pose evaluation: position and velocity metrics, per-joint breakdowns,
gate-motion diagnostics, and a constant-velocity Kalman baseline.

Positions are millimeters; velocities are first-order finite differences
between consecutive frames with a one-frame timestep, reported in mm/frame.
No smoothing, filtering, or interpolation is applied anywhere except by the
explicit Kalman baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, ShapeError


def _check_pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction shape {pred.shape} != ground truth {gt.shape}")
    return pred, gt


# ---------------------------------------------------------------------------
# Position metrics

def mpjpe(pred, gt):
    """Mean Euclidean joint error in mm over all frames and joints.

    Accepts (J, 3) poses or (T, J, 3) sequences.
    """
    pred, gt = _check_pair(pred, gt)
    return float(np.linalg.norm(pred - gt, axis=-1).mean())


def similarity_align(pred, gt, with_scale=True):
    """Best-fit similarity transform (rotation via SVD of the cross-covariance
    with reflection correction, optional scale, translation) mapping one
    (J, 3) pose onto another; returns the aligned prediction.

    Coincident-joint degenerate inputs fall back to translation-only.
    """
    pred, gt = _check_pair(pred, gt)
    mu_p = pred.mean(axis=0)
    mu_g = gt.mean(axis=0)
    p0 = pred - mu_p
    g0 = gt - mu_g
    var_p = float((p0 * p0).sum()) / len(pred)
    var_g = float((g0 * g0).sum()) / len(gt)
    if var_p < 1e-18 or var_g < 1e-18:
        return pred - mu_p + mu_g
    cov = g0.T @ p0 / len(pred)
    u, s, vt = np.linalg.svd(cov)
    d = np.ones(3)
    d[-1] = np.sign(np.linalg.det(u) * np.linalg.det(vt))
    rot = u @ np.diag(d) @ vt
    scale = float((s * d).sum()) / var_p if with_scale else 1.0
    return scale * p0 @ rot.T + mu_g


def pa_mpjpe(pred, gt, with_scale=True):
    """MPJPE after per-frame similarity alignment; never exceeds mpjpe."""
    pred, gt = _check_pair(pred, gt)
    if pred.ndim == 2:
        pred = pred[None]
        gt = gt[None]
    total = 0.0
    count = 0
    for p, g in zip(pred, gt):
        aligned = similarity_align(p, g, with_scale=with_scale)
        total += float(np.linalg.norm(aligned - g, axis=-1).sum())
        count += len(g)
    return total / count


# ---------------------------------------------------------------------------
# Velocity metrics

def velocities(seq):
    """(T-1, J, 3) finite differences between consecutive frames (dt = 1)."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 3 or seq.shape[0] < 2:
        raise ShapeError(f"need a (T>=2, J, 3) sequence, got shape {seq.shape}")
    return np.diff(seq, axis=0)


def mpjve(pred, gt):
    """Mean norm of the velocity error, mm/frame."""
    pred, gt = _check_pair(pred, gt)
    return float(np.linalg.norm(velocities(pred) - velocities(gt), axis=-1).mean())


def akv(pred):
    """Mean norm of the predicted velocities, mm/frame."""
    return float(np.linalg.norm(velocities(pred), axis=-1).mean())


# ---------------------------------------------------------------------------
# Aggregation across sequences and per-joint breakdown

@dataclass
class MetricReport:
    mpjpe: float
    pa_mpjpe: float
    mpjve: float
    akv: float

    def as_rows(self):
        return [("mpjpe", self.mpjpe), ("pa_mpjpe", self.pa_mpjpe),
                ("mpjve", self.mpjve), ("akv", self.akv)]


def sequence_report(preds, gts, with_scale=True):
    """Pooled metrics over a list of (T, J, 3) sequences; every frame-joint
    term carries equal weight regardless of sequence lengths."""
    if not preds or len(preds) != len(gts):
        raise ShapeError("need matching nonempty prediction/target lists")
    pos_err = pa_err = 0.0
    pos_n = 0
    vel_err = vel_mag = 0.0
    vel_n = 0
    for pred, gt in zip(preds, gts):
        pred, gt = _check_pair(pred, gt)
        pos_err += float(np.linalg.norm(pred - gt, axis=-1).sum())
        pos_n += pred.shape[0] * pred.shape[1]
        pa_err += pa_mpjpe(pred, gt, with_scale=with_scale) * pred.shape[0] * pred.shape[1]
        if pred.shape[0] >= 2:
            dv = velocities(pred) - velocities(gt)
            vel_err += float(np.linalg.norm(dv, axis=-1).sum())
            vel_mag += float(np.linalg.norm(velocities(pred), axis=-1).sum())
            vel_n += (pred.shape[0] - 1) * pred.shape[1]
    return MetricReport(
        mpjpe=pos_err / pos_n,
        pa_mpjpe=pa_err / pos_n,
        mpjve=vel_err / vel_n if vel_n else 0.0,
        akv=vel_mag / vel_n if vel_n else 0.0,
    )


def per_joint_report(pred, gt, joint_names):
    """Per-joint MPJPE/MPJVE rows; their means equal the scalar metrics."""
    pred, gt = _check_pair(pred, gt)
    if len(joint_names) != pred.shape[1]:
        raise ShapeError(f"{len(joint_names)} names for {pred.shape[1]} joints")
    rows = []
    for j, name in enumerate(joint_names):
        rows.append((name,
                     mpjpe(pred[:, j:j + 1], gt[:, j:j + 1]),
                     mpjve(pred[:, j:j + 1], gt[:, j:j + 1])))
    return rows


# ---------------------------------------------------------------------------
# Gate-motion diagnostics

def motion_proxy(gt):
    """Per-frame mean joint displacement of the ground truth, length T-1."""
    return np.linalg.norm(velocities(gt), axis=-1).mean(axis=1)


def frame_gate_score(gates, spatial_map, cell_selection="occupied"):
    """Collapse per-cell gates to one frame score.

    occupied: mean over cells whose spatial magnitude exceeds the frame
    median (a body-occupancy proxy), falling back to the global mean when
    nothing exceeds it. global: mean over all cells.
    """
    gates = np.asarray(gates, dtype=np.float64).reshape(-1)
    if cell_selection == "global":
        return float(gates.mean())
    if cell_selection != "occupied":
        raise ConfigError(f"unknown cell_selection {cell_selection!r}")
    flat = np.asarray(spatial_map, dtype=np.float64).reshape(-1)
    if flat.shape != gates.shape:
        raise ShapeError("spatial map and gate vector disagree on cell count")
    selected = flat > np.median(flat)
    if not selected.any():
        return float(gates.mean())
    return float(gates[selected].mean())


def pearson_r(x, y):
    """Pearson correlation; None when either input has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ShapeError("pearson_r needs two equal-length vectors, n >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float((xc * xc).sum()) * float((yc * yc).sum()))
    if denom == 0.0:
        return None
    return float((xc * yc).sum() / denom)


@dataclass
class GateDiagnostics:
    records: list                      # (seq, frame, g_bar, v_t, bin)
    pearson: float | None
    binned_mpjve: list = field(default_factory=list)   # one value per quantile bin


def gate_motion_diag(gate_seqs, preds, gts, spatial_maps, bins=5,
                     cell_selection="occupied"):
    """Correlate frame gate scores with the ground-truth motion proxy and
    stratify per-frame velocity error by gate quantile.

    gate_seqs[i]: (T_i, N_v); spatial_maps[i]: (T_i, R*A) or (T_i, R, A).
    Frames lacking a successor (the last of each sequence) are skipped.
    """
    if bins < 2:
        raise DomainError(f"need at least 2 quantile bins, got {bins}")
    g_scores, v_vals, e_vals, keys = [], [], [], []
    for idx, (gate_seq, pred, gt, smaps) in enumerate(
            zip(gate_seqs, preds, gts, spatial_maps)):
        pred, gt = _check_pair(pred, gt)
        vel_err = np.linalg.norm(velocities(pred) - velocities(gt), axis=-1).mean(axis=1)
        proxy = motion_proxy(gt)
        for t in range(len(proxy)):
            g_scores.append(frame_gate_score(gate_seq[t], np.asarray(smaps[t]),
                                             cell_selection))
            v_vals.append(float(proxy[t]))
            e_vals.append(float(vel_err[t]))
            keys.append((idx, t))
    g_scores = np.array(g_scores)
    v_vals = np.array(v_vals)
    e_vals = np.array(e_vals)
    r = pearson_r(g_scores, v_vals)
    order = np.argsort(g_scores, kind="stable")
    chunks = np.array_split(order, bins)
    bin_of = np.zeros(len(order), dtype=int)
    binned = []
    for b, chunk in enumerate(chunks):
        bin_of[chunk] = b
        binned.append(float(e_vals[chunk].mean()) if len(chunk) else float("nan"))
    records = [(keys[i][0], keys[i][1], float(g_scores[i]), float(v_vals[i]),
                int(bin_of[i])) for i in range(len(keys))]
    return GateDiagnostics(records=records, pearson=r, binned_mpjve=binned)


# ---------------------------------------------------------------------------
# Constant-velocity Kalman baseline

@dataclass
class KalmanConfig:
    process_noise: float = 1.0        # mm^2 / frame^2
    measurement_noise: float = 25.0   # mm^2
    initial_covariance: float = 1e4

    def __post_init__(self):
        if self.process_noise <= 0 or self.measurement_noise <= 0:
            raise ConfigError("Kalman noise parameters must be positive")


def kalman_smooth(pred, cfg=None):
    """Causal constant-velocity Kalman filter over each joint axis.

    State [position, velocity], transition [[1, 1], [0, 1]], measurement
    extracts position. The first frame initializes the state and passes
    through unchanged; no backward smoothing pass.
    """
    cfg = cfg or KalmanConfig()
    seq = np.asarray(pred, dtype=np.float64)
    if seq.ndim != 3 or seq.shape[0] < 2:
        raise ShapeError(f"need a (T>=2, J, 3) sequence, got shape {seq.shape}")
    t_len, joints, axes = seq.shape
    flat = seq.reshape(t_len, joints * axes)
    out = np.empty_like(flat)
    f_mat = np.array([[1.0, 1.0], [0.0, 1.0]])
    q_mat = cfg.process_noise * np.array([[0.25, 0.5], [0.5, 1.0]])
    h = np.array([1.0, 0.0])
    for col in range(flat.shape[1]):
        x = np.array([flat[0, col], 0.0])
        p = np.eye(2) * cfg.initial_covariance
        out[0, col] = x[0]
        for t in range(1, t_len):
            x = f_mat @ x
            p = f_mat @ p @ f_mat.T + q_mat
            innovation = flat[t, col] - h @ x
            s = h @ p @ h + cfg.measurement_noise
            k = (p @ h) / s
            x = x + k * innovation
            p = p - np.outer(k, h @ p)
            out[t, col] = x[0]
    return out.reshape(t_len, joints, axes)
