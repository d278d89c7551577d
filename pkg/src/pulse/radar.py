"""FMCW radar simulation at desk scale.

Articulated skeletons move point scatterers through a scene (plus static
clutter, one fan-like oscillating reflector, and mirrored multipath ghosts);
each frame is rendered to a complex intermediate-frequency cube and turned
into a range-angle-Doppler magnitude tensor by three unitary FFTs.

Conventions: the radar sits at the origin, +y is boresight, +x lateral,
+z up. Ranges use the full 3-D distance, azimuth is measured in the x-y
plane. Doppler and angle axes are fftshifted so zero sits at the center
bin. All FFT sizes are powers of two and carry 1/sqrt(N) scaling, so each
transform preserves energy exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, UsageError

C_LIGHT = 299_792_458.0

JOINT_NAMES = ("head", "torso", "elbow_l", "wrist_l",
               "elbow_r", "wrist_r", "ankle_l", "ankle_r")

BONES = ((0, 1), (1, 2), (2, 3), (1, 4), (4, 5), (1, 6), (1, 7))

MOTIONS = ("walk", "wave", "still", "jitter")


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass
class RadarConfig:
    """Chirp, array, and output-grid parameters.

    The Doppler bin count equals chirps_per_frame; the fast-time FFT is
    cropped to R range bins and the element axis is zero-padded to A.
    """

    carrier_hz: float = 60e9
    bandwidth_hz: float = 1.0e9
    chirp_duration_s: float = 1.0e-3
    chirps_per_frame: int = 16
    fast_samples_per_chirp: int = 64
    virtual_elements: int = 8
    R: int = 32
    A: int = 32
    noise_std: float = 1.0
    frame_rate_hz: float = 10.0

    def __post_init__(self):
        if self.R > self.fast_samples_per_chirp:
            raise ConfigError(
                f"R={self.R} exceeds fast_samples_per_chirp={self.fast_samples_per_chirp}")
        if self.A < self.virtual_elements:
            raise ConfigError(
                f"A={self.A} is smaller than virtual_elements={self.virtual_elements}")
        for name in ("chirps_per_frame", "fast_samples_per_chirp", "A"):
            if not _is_pow2(getattr(self, name)):
                raise ConfigError(f"{name} must be a power of two for the radix-2 FFT")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be nonnegative")

    @property
    def D(self):
        return self.chirps_per_frame

    @property
    def wavelength_m(self):
        return C_LIGHT / self.carrier_hz

    @property
    def fast_sample_rate_hz(self):
        return self.fast_samples_per_chirp / self.chirp_duration_s

    @property
    def element_spacing_m(self):
        return self.wavelength_m / 2.0

    @property
    def range_per_bin_m(self):
        return C_LIGHT / (2.0 * self.bandwidth_hz)

    @property
    def max_range_m(self):
        """Largest range still inside the cropped tensor."""
        return self.R * self.range_per_bin_m

    @property
    def max_speed_mps(self):
        """Unambiguous radial speed: wavelength / (4 * chirp duration)."""
        return self.wavelength_m / (4.0 * self.chirp_duration_s)


@dataclass
class Scatterer:
    position: np.ndarray           # meters, shape (3,)
    radial_velocity: float         # m/s, positive toward the radar
    reflectivity: float            # linear amplitude

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        if self.reflectivity < 0:
            raise DomainError(f"reflectivity must be >= 0, got {self.reflectivity}")


# ---------------------------------------------------------------------------
# Radix-2 FFT with unitary scaling.

def _bit_reverse_indices(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_unitary(x, axis=-1):
    """Iterative radix-2 Cooley-Tukey DFT with 1/sqrt(N) scaling.

    Requires a power-of-two extent along `axis`; vectorized over all other
    axes. exp(-i 2 pi k n / N) sign convention.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[axis]
    if not _is_pow2(n):
        raise ConfigError(f"FFT length {n} is not a power of two")
    y = np.moveaxis(x, axis, -1)
    lead = y.shape[:-1]
    y = y[..., _bit_reverse_indices(n)]
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        y = y.reshape(lead + (n // size, size))
        a = y[..., :half]
        b = y[..., half:] * tw
        y = np.concatenate([a + b, a - b], axis=-1).reshape(lead + (n,))
        size *= 2
    y = y / math.sqrt(n)
    return np.moveaxis(y, -1, axis)


def fftshift_axis(x, axis):
    """Move the zero-frequency bin to index n//2 along `axis`."""
    return np.roll(x, x.shape[axis] // 2, axis=axis)


def _window(n, kind):
    if kind == "rect":
        return np.ones(n)
    if kind == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / (n - 1))
    raise UsageError(f"unknown window {kind!r}; expected 'rect' or 'hann'")


# ---------------------------------------------------------------------------
# Bin mapping oracles.

def range_bin(range_m, cfg):
    """Fast-time DFT bin for a scatterer at the given range."""
    if range_m < 0:
        raise DomainError(f"range must be nonnegative, got {range_m}")
    beat_hz = 2.0 * cfg.bandwidth_hz * range_m / (C_LIGHT * cfg.chirp_duration_s)
    pos = beat_hz / cfg.fast_sample_rate_hz * cfg.fast_samples_per_chirp
    if pos >= cfg.R - 0.5:
        raise DomainError(
            f"range {range_m} m is beyond the cropped span ({cfg.max_range_m:.3f} m)")
    return min(cfg.R - 1, max(0, int(round(pos))))


def doppler_bin(v_mps, cfg):
    """Slow-time DFT bin (fftshifted, zero-Doppler at D/2) for radial speed."""
    if abs(v_mps) > cfg.max_speed_mps:
        raise DomainError(
            f"|v|={abs(v_mps)} m/s exceeds unambiguous span {cfg.max_speed_mps:.3f} m/s")
    pos = (2.0 * v_mps / cfg.wavelength_m) * cfg.chirp_duration_s * cfg.D
    return min(cfg.D - 1, max(0, cfg.D // 2 + int(round(pos))))


def angle_bin(theta_rad, cfg):
    """Element-axis DFT bin (fftshifted, boresight at A/2) for azimuth."""
    s = math.sin(theta_rad)
    if abs(s) > 1.0:
        raise DomainError(f"invalid azimuth {theta_rad}")
    pos = (cfg.element_spacing_m / cfg.wavelength_m) * s * cfg.A
    return min(cfg.A - 1, max(0, cfg.A // 2 + int(round(pos))))


def range_for_bin(k, cfg):
    return k * cfg.range_per_bin_m


def speed_for_bin(k, cfg):
    return (k - cfg.D // 2) * cfg.wavelength_m / (2.0 * cfg.chirp_duration_s * cfg.D)


def sin_theta_for_bin(k, cfg):
    return (k - cfg.A // 2) / (cfg.A * cfg.element_spacing_m / cfg.wavelength_m)


# ---------------------------------------------------------------------------
# Frame rendering and the three-FFT pipeline.

def render_frame(scatterers, cfg, seed=0):
    """Sum point-target returns into a complex IF cube.

    Each scatterer contributes
        a * exp(i 2 pi [f_b t_fast + f_d T_c k + (m d / lambda) sin(theta)])
    with f_b = 2 B r / (c T_c) and f_d = 2 v_r / lambda, followed by
    complex Gaussian noise (per-component std = noise_std) when enabled.
    Output shape: (fast_samples, chirps, elements).
    """
    shape = (cfg.fast_samples_per_chirp, cfg.chirps_per_frame, cfg.virtual_elements)
    cube = np.zeros(shape, dtype=np.complex128)
    t_fast = np.arange(cfg.fast_samples_per_chirp) / cfg.fast_sample_rate_hz
    chirp_idx = np.arange(cfg.chirps_per_frame)
    elem_idx = np.arange(cfg.virtual_elements)
    for sc in scatterers:
        r = float(np.linalg.norm(sc.position))
        range_bin(r, cfg)                      # span checks raise DomainError
        doppler_bin(sc.radial_velocity, cfg)
        lateral = math.hypot(sc.position[0], sc.position[1])
        sin_theta = sc.position[0] / lateral if lateral > 0 else 0.0
        beat_hz = 2.0 * cfg.bandwidth_hz * r / (C_LIGHT * cfg.chirp_duration_s)
        doppler_hz = 2.0 * sc.radial_velocity / cfg.wavelength_m
        phase = (beat_hz * t_fast[:, None, None]
                 + doppler_hz * cfg.chirp_duration_s * chirp_idx[None, :, None]
                 + (cfg.element_spacing_m / cfg.wavelength_m) * sin_theta
                 * elem_idx[None, None, :])
        cube += sc.reflectivity * np.exp(2j * np.pi * phase)
    if cfg.noise_std > 0:
        entropy = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
        cube += cfg.noise_std * (rng.standard_normal(shape)
                                 + 1j * rng.standard_normal(shape))
    return cube


def rad_fft(cube, R, A, D, window="rect"):
    """IF cube -> nonnegative (R, A, D) magnitude tensor.

    Fast-time FFT then crop to the first R range bins; slow-time FFT across
    the first D chirps, fftshifted so zero Doppler is bin D/2; element FFT
    zero-padded to A, fftshifted so boresight is bin A/2.
    """
    cube = np.asarray(cube, dtype=np.complex128)
    n_fast, n_chirps, n_elem = cube.shape
    if n_fast < R or n_chirps < D or n_elem > A:
        raise UsageError(
            f"cube shape {cube.shape} incompatible with targets R={R} A={A} D={D}")
    x = cube * _window(n_fast, window)[:, None, None]
    x = fft_unitary(x, axis=0)[:R]
    x = x[:, :D, :] * _window(D, window)[None, :, None]
    x = fftshift_axis(fft_unitary(x, axis=1), axis=1)
    if n_elem < A:
        pad = np.zeros((R, D, A - n_elem), dtype=np.complex128)
        x = np.concatenate([x, pad], axis=2)
    x = fftshift_axis(fft_unitary(x, axis=2), axis=2)
    return np.abs(np.transpose(x, (0, 2, 1)))


# ---------------------------------------------------------------------------
# Skeleton synthesis.

class _Sinusoid:
    """amplitude * sin(2 pi f t + phase) added per axis to a base offset."""

    def __init__(self, base, amp, freq, phase):
        self.base = np.asarray(base, dtype=np.float64)
        self.amp = np.asarray(amp, dtype=np.float64)
        self.freq = np.asarray(freq, dtype=np.float64)
        self.phase = np.asarray(phase, dtype=np.float64)

    def at(self, t):
        return self.base + self.amp * np.sin(2.0 * np.pi * self.freq * t + self.phase)


class SkeletonMotion:
    """Seeded parametric joint trajectories for one sequence (meters)."""

    def __init__(self, seed, motion):
        if motion not in MOTIONS:
            raise UsageError(f"unknown motion {motion!r}; expected one of {MOTIONS}")
        self.motion = motion
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 101]))
        # small placement jitter: sub-bin localization varies across scenes
        # while motion phase/amplitude carry the sequence-level diversity
        cx = rng.uniform(-0.08, 0.08)
        cy = rng.uniform(2.1, 2.3)
        base = {
            "head": (cx, cy, 1.55), "torso": (cx, cy, 1.05),
            "elbow_l": (cx - 0.25, cy, 1.15), "wrist_l": (cx - 0.32, cy + 0.04, 0.9),
            "elbow_r": (cx + 0.25, cy, 1.15), "wrist_r": (cx + 0.32, cy + 0.04, 0.9),
            "ankle_l": (cx - 0.12, cy, 0.08), "ankle_r": (cx + 0.12, cy, 0.08),
        }
        zero = np.zeros(3)
        tracks = {}
        if motion == "still":
            for name in JOINT_NAMES:
                tracks[name] = _Sinusoid(base[name], zero, zero, zero)
        elif motion == "jitter":
            for name in JOINT_NAMES:
                amp = rng.uniform(0.005, 0.015, size=3)
                freq = rng.uniform(1.5, 3.0, size=3)
                phase = rng.uniform(0, 2 * np.pi, size=3)
                tracks[name] = _Sinusoid(base[name], amp, freq, phase)
        elif motion == "walk":
            f = rng.uniform(0.5, 0.65)
            arm = rng.uniform(0.14, 0.18)
            leg = rng.uniform(0.08, 0.12)
            sway = 0.03
            phase0 = rng.uniform(0, 2 * np.pi)
            two_pi_f = np.array([0.0, f, 2 * f])
            tracks["torso"] = _Sinusoid(base["torso"], (0.0, sway, 0.02),
                                        two_pi_f, (0.0, phase0, phase0))
            tracks["head"] = _Sinusoid(base["head"], (0.0, sway, 0.02),
                                       two_pi_f, (0.0, phase0, phase0))
            for side, sgn in (("l", 0.0), ("r", np.pi)):
                tracks[f"elbow_{side}"] = _Sinusoid(
                    base[f"elbow_{side}"], (0.0, arm / 2, 0.0),
                    (0.0, f, 0.0), (0.0, phase0 + sgn, 0.0))
                tracks[f"wrist_{side}"] = _Sinusoid(
                    base[f"wrist_{side}"], (0.0, arm, 0.02),
                    (0.0, f, f), (0.0, phase0 + sgn, phase0 + sgn))
                # contralateral leg: in phase with the opposite arm
                tracks[f"ankle_{side}"] = _Sinusoid(
                    base[f"ankle_{side}"], (0.0, leg, 0.0),
                    (0.0, f, 0.0), (0.0, phase0 + np.pi - sgn, 0.0))
        elif motion == "wave":
            f = rng.uniform(0.9, 1.1)
            phase0 = rng.uniform(0, 2 * np.pi)
            for name in JOINT_NAMES:
                tracks[name] = _Sinusoid(base[name], (0.0, 0.01, 0.0),
                                         (0.0, f / 2, 0.0), (0.0, phase0, 0.0))
            tracks["wrist_r"] = _Sinusoid(base["wrist_r"], (0.02, 0.12, 0.1),
                                          (f, f, f), (phase0, phase0, phase0 + np.pi / 2))
            tracks["elbow_r"] = _Sinusoid(base["elbow_r"], (0.01, 0.06, 0.05),
                                          (f, f, f), (phase0, phase0, phase0 + np.pi / 2))
        self._tracks = [tracks[name] for name in JOINT_NAMES]

    def joints_m(self, t):
        return np.stack([trk.at(t) for trk in self._tracks])

    def joints_mm(self, t):
        return self.joints_m(t) * 1000.0


def synth_skeleton_sequence(seed, frames, motion, frame_rate):
    """Sample a seeded parametric skeleton at frame_rate; returns mm poses
    of shape (frames, J, 3)."""
    if frames < 2:
        raise UsageError(f"need at least 2 frames, got {frames}")
    model = SkeletonMotion(seed, motion)
    return np.stack([model.joints_mm(i / frame_rate) for i in range(frames)])


# ---------------------------------------------------------------------------
# Scene: body scatterers + clutter + multipath ghosts.

_BONE_FRACTIONS = (0.2, 0.5, 0.8)
_VELOCITY_DT = 1e-3
GHOST_ATTENUATION = 0.3


def _radial_speed(pos_fn, t):
    """Positive-toward-radar radial speed of a trajectory at time t."""
    r_plus = np.linalg.norm(pos_fn(t + _VELOCITY_DT))
    r_minus = np.linalg.norm(pos_fn(t - _VELOCITY_DT))
    return -(r_plus - r_minus) / (2.0 * _VELOCITY_DT)


@dataclass
class Scene:
    """Everything render_frame needs, as pure functions of time."""

    motion: SkeletonMotion
    body_reflectivities: np.ndarray
    clutter_static: list = field(default_factory=list)   # list[Scatterer]
    oscillator: tuple | None = None      # (base_pos, unit_dir, amp_m, freq_hz, phase, refl)
    mirror_x: float | None = None        # multipath mirror plane x = mirror_x

    def pose_mm(self, t):
        return self.motion.joints_mm(t)

    def _body_points(self, t):
        joints = self.motion.joints_m(t)
        pts = [joints[0]]  # head point scatterer
        for a, b in BONES:
            for frac in _BONE_FRACTIONS:
                pts.append(joints[a] + frac * (joints[b] - joints[a]))
        return np.stack(pts)

    def _oscillator_pos(self, t):
        base, direction, amp, freq, phase, _ = self.oscillator
        return base + direction * amp * math.sin(2.0 * math.pi * freq * t + phase)

    @staticmethod
    def _radial_speeds(p_minus, p_plus):
        r_plus = np.linalg.norm(p_plus, axis=-1)
        r_minus = np.linalg.norm(p_minus, axis=-1)
        return -(r_plus - r_minus) / (2.0 * _VELOCITY_DT)

    def scatterers_at(self, t):
        body = self._body_points(t)
        body_p = self._body_points(t + _VELOCITY_DT)
        body_m = self._body_points(t - _VELOCITY_DT)
        speeds = self._radial_speeds(body_m, body_p)
        out = [Scatterer(body[i], float(speeds[i]), float(self.body_reflectivities[i]))
               for i in range(len(body))]
        if self.mirror_x is not None:
            def mirrored(pts):
                g = pts.copy()
                g[:, 0] = 2.0 * self.mirror_x - g[:, 0]
                return g
            ghost = mirrored(body)
            ghost_speeds = self._radial_speeds(mirrored(body_m), mirrored(body_p))
            out.extend(Scatterer(ghost[i], float(ghost_speeds[i]),
                                 GHOST_ATTENUATION * float(self.body_reflectivities[i]))
                       for i in range(len(ghost)))
        out.extend(self.clutter_static)
        if self.oscillator is not None:
            refl = self.oscillator[5]
            out.append(Scatterer(self._oscillator_pos(t),
                                 _radial_speed(self._oscillator_pos, t), refl))
        return out


def make_scene(cfg, seed, motion="walk", clutter=True):
    """Build a seeded scene and verify every scatterer stays inside the
    unambiguous range/Doppler span over a 30 s horizon."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 202]))
    sk = SkeletonMotion(seed, motion)
    n_body = 1 + len(BONES) * len(_BONE_FRACTIONS)
    refl = rng.uniform(0.7, 1.3, size=n_body)
    scene = Scene(motion=sk, body_reflectivities=refl)
    if clutter:
        for _ in range(3):
            pos = np.array([rng.uniform(-1.4, 1.4), rng.uniform(1.2, 3.4),
                            rng.uniform(0.0, 1.5)])
            scene.clutter_static.append(Scatterer(pos, 0.0, rng.uniform(0.5, 1.5)))
        fan_base = np.array([rng.choice([-1.0, 1.0]) * rng.uniform(0.8, 1.3),
                             rng.uniform(1.5, 2.8), rng.uniform(0.5, 1.5)])
        direction = fan_base / np.linalg.norm(fan_base)
        freq = rng.uniform(1.5, 2.5)
        v_amp = 1.0
        scene.oscillator = (fan_base, direction, v_amp / (2.0 * math.pi * freq),
                            freq, rng.uniform(0, 2 * np.pi), rng.uniform(0.8, 1.2))
        scene.mirror_x = rng.uniform(1.05, 1.25)
    margin_r = cfg.max_range_m - 0.6 * cfg.range_per_bin_m
    for t in np.linspace(0.0, 30.0, 61):
        for sc in scene.scatterers_at(t):
            r = float(np.linalg.norm(sc.position))
            if r >= margin_r:
                raise DomainError(f"scene scatterer at {r:.2f} m exceeds the span")
            if abs(sc.radial_velocity) >= 0.98 * cfg.max_speed_mps:
                raise DomainError(
                    f"scene scatterer at {sc.radial_velocity:.2f} m/s exceeds the span")
    return scene


def render_scene_frame(scene, frame_idx, cfg, noise_seed):
    """RadTensor for one frame of a scene (frame time = index / frame rate)."""
    t = frame_idx / cfg.frame_rate_hz
    cube = render_frame(scene.scatterers_at(t), cfg, seed=noise_seed)
    return rad_fft(cube, cfg.R, cfg.A, cfg.D, window="rect")


# ---------------------------------------------------------------------------
# Dataset emission

def split_sequences(n, ratios):
    """Deterministic disjoint sequence split. Guarantees at least one train
    sequence, and a val sequence whenever two or more exist."""
    if n < 1:
        raise UsageError("need at least one sequence")
    r_train, r_val, _ = ratios
    n_train = max(1, int(round(n * r_train)))
    n_val = int(round(n * r_val))
    if n >= 2 and n_val == 0:
        n_val = 1
    n_train = min(n_train, n - n_val) if n > n_val else n_train
    if n_train < 1:
        n_train = 1
        n_val = min(n_val, n - 1)
    n_test = n - n_train - n_val
    ids = [f"{i:03d}" for i in range(n)]
    return (ids[:n_train], ids[n_train:n_train + n_val],
            ids[n_train + n_val:n_train + n_val + n_test])


def emit_dataset(cfg, scenes, ratios, out_dir, seed, frames_per_seq, motions,
                 clutter=True):
    """Render every scene to .rdt frames plus poses.csv and a manifest.

    Layout: manifest.txt (key=value), frames/SEQ_FRAME.rdt, poses.csv with
    header seq,frame,joint,x_mm,y_mm,z_mm. Byte-identical for a fixed seed.
    """
    from . import storage

    out = Path(out_dir)
    try:
        (out / "frames").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create dataset directory {out}: {exc}") from exc
    train_ids, val_ids, test_ids = split_sequences(len(scenes), ratios)
    pose_rows = []
    for s_idx, scene in enumerate(scenes):
        seq_id = f"{s_idx:03d}"
        for f_idx in range(frames_per_seq):
            tensor = render_scene_frame(scene, f_idx, cfg,
                                        noise_seed=[seed, s_idx, f_idx])
            storage.write_rdt(out / "frames" / f"{seq_id}_{f_idx:04d}.rdt", tensor)
            pose = scene.pose_mm(f_idx / cfg.frame_rate_hz)
            for j in range(pose.shape[0]):
                pose_rows.append((seq_id, f_idx, j, pose[j, 0], pose[j, 1],
                                  pose[j, 2]))
    storage.write_poses_csv(out / "poses.csv", pose_rows)
    manifest = {
        "seed": seed,
        "R": cfg.R,
        "A": cfg.A,
        "D": cfg.D,
        "J": len(JOINT_NAMES),
        "frame_rate": cfg.frame_rate_hz,
        "carrier_hz": cfg.carrier_hz,
        "bandwidth_hz": cfg.bandwidth_hz,
        "chirp_duration_s": cfg.chirp_duration_s,
        "chirps_per_frame": cfg.chirps_per_frame,
        "fast_samples_per_chirp": cfg.fast_samples_per_chirp,
        "virtual_elements": cfg.virtual_elements,
        "noise_std": cfg.noise_std,
        "frames_per_sequence": frames_per_seq,
        "sequences": len(scenes),
        "clutter": "true" if clutter else "false",
        "motions": ",".join(motions),
        "joint_names": ",".join(JOINT_NAMES),
        "split_train": ",".join(train_ids),
        "split_val": ",".join(val_ids),
        "split_test": ",".join(test_ids),
    }
    storage.write_manifest(out / "manifest.txt", manifest)
    return manifest


def radar_config_from_manifest(manifest):
    return RadarConfig(
        carrier_hz=float(manifest["carrier_hz"]),
        bandwidth_hz=float(manifest["bandwidth_hz"]),
        chirp_duration_s=float(manifest["chirp_duration_s"]),
        chirps_per_frame=int(manifest["chirps_per_frame"]),
        fast_samples_per_chirp=int(manifest["fast_samples_per_chirp"]),
        virtual_elements=int(manifest["virtual_elements"]),
        R=int(manifest["R"]),
        A=int(manifest["A"]),
        noise_std=float(manifest["noise_std"]),
        frame_rate_hz=float(manifest["frame_rate"]),
    )
