"""Synthetic lidar pulse scenes: 30 road/object classes on a 16x16 grid.

Every pixel carries a normalized echo delay in [0, 1]; 1.0 is the hard cap
of the listening window.  The sensor sits at the center of the bottom edge,
the ground plane recedes toward a horizon, and objects sit on the ground at
one of three depth levels.  Geometry is declarative data below: a depth
template per road condition plus a placement table of eight road/object
combinations per object type.

Every class-discriminative feature is kept inside the early delay band
(roughly 0.09 to 0.35), for two reasons.  First, the exp(t) transform the
classifier lives in compresses late arrivals so hard that anything parked
near the cap is both invisible to learning and a huge noise amplifier in
weighted sums.  Second, a recognizer scored on how few input spikes it needs
can only be accurate if everything that separates the classes has already
arrived by the time it is expected to answer; the far road and the sky at
SKY_DEPTH are late, shared background that a well-trained net never waits
for.

Classes 0..5 are pure road conditions, 6..29 are {car, pedestrian, truck}
crossed with the placement table.  Per-pattern variation is a single depth
jitter on the object footprint (the whole map for road-only classes) plus
per-pixel additive uniform noise, both seeded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import T_MAX_US, KernelConfig

GRID = 16
N_PIXELS = GRID * GRID
N_CLASSES = 30

# Depth units are abstract; DEPTH_CAP normalizes to delay 1.0.
DEPTH_CAP = 40.0
SKY_DEPTH = 29.0         # far clutter (delay 0.725), deliberately off-cap
HORIZON_ROW = 6          # first ground row; rows above are sky except structures
JITTER_AMPLITUDE = 0.05  # default object depth jitter, in delay units

ROAD_NAMES = ("tunnel", "road", "road_walls", "lower_bridge",
              "upper_bridge", "road_wall_lamp")
OBJECT_NAMES = ("car", "pedestrian", "truck")

# (height, width) of each object footprint in pixels.
OBJECT_SHAPE = {"car": (3, 5), "pedestrian": (5, 2), "truck": (5, 7)}

# The eight road/object combinations every object type is rendered in:
# (combo name, road class id, object base row, column mode).
COMBOS = (
    ("road_mid", 1, 9, "center"),
    ("road_near", 1, 11, "center"),
    ("road_far", 1, 8, "center"),
    ("walls", 2, 9, "center"),
    ("tunnel", 0, 9, "center"),
    ("lower_bridge", 3, 9, "center"),
    ("upper_bridge", 4, 9, "center"),
    ("walls_lamp", 5, 9, "left"),
)


class UnknownClass(ValueError):
    """Class id outside the catalog."""


@dataclass(frozen=True)
class DelayMap:
    """One 16x16 pattern of normalized pulse delays plus its label."""

    delays: np.ndarray
    label: int

    def __post_init__(self) -> None:
        d = np.asarray(self.delays, dtype=np.float64)
        if d.shape != (GRID, GRID):
            raise ValueError(f"delay map must be {GRID}x{GRID}, got {d.shape}")
        if (d < 0.0).any() or (d > 1.0).any() or np.isnan(d).any():
            raise ValueError("delays must lie in [0, 1]")
        object.__setattr__(self, "delays", d)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive per-pixel noise U[0, upper], clamped to the delay cap."""

    upper: float
    seed: int = 0

    def __post_init__(self) -> None:
        # benchmark ranges stop at 0.5 but any non-negative bound is legal
        if not self.upper >= 0.0:
            raise ValueError(f"noise upper bound must be >= 0, got {self.upper!r}")


def _road_depth(row: int) -> float:
    # perspective ground range; row 15 is nearest
    return 48.0 / (row - 4.0)


def _base_road() -> np.ndarray:
    d = np.full((GRID, GRID), SKY_DEPTH)
    for r in range(HORIZON_ROW, GRID):
        d[r, :] = _road_depth(r)
    return d


def _add_walls(d: np.ndarray) -> None:
    # vertical faces at the road edges: slightly nearer than the ground at
    # the same image row, capped so even the wall tops stay in the early band
    for r in range(2, GRID):
        depth = min(_road_depth(r) * 0.85, 14.0) if r >= HORIZON_ROW \
            else 11.0 + (5 - r)
        d[r, [0, 1, 14, 15]] = depth


def _road_template(road_id: int) -> np.ndarray:
    d = _base_road()
    if road_id == 0:  # tunnel: walls, overhead ceiling, near throat
        _add_walls(d)
        d[3:HORIZON_ROW, 2:14] = 14.0
        d[0, :] = 7.0
        d[1, :] = 10.0
        d[2, :] = 13.0
    elif road_id == 1:  # plain road
        pass
    elif road_id == 2:  # road with walls
        _add_walls(d)
    elif road_id == 3:  # lower bridge: deck overhead plus pillars
        d[3:5, :] = 13.0
        d[5:10, [1, 2, 13, 14]] = 13.0
    elif road_id == 4:  # upper bridge: void beside the span, near parapet
        d[HORIZON_ROW:, [0, 1, 2, 13, 14, 15]] = 26.0
        d[HORIZON_ROW:10, [0, 15]] = 9.0
    elif road_id == 5:  # walls plus a street lamp on the right
        _add_walls(d)
        d[3:9, 11] = 9.0
        d[2:4, 10:13] = 9.0
    else:
        raise UnknownClass(f"road id {road_id}")
    return d


def _object_placement(class_id: int):
    """(object name, base row, first column) for an object class id."""
    obj_idx, combo_idx = divmod(class_id - len(ROAD_NAMES), len(COMBOS))
    name = OBJECT_NAMES[obj_idx]
    _, road_id, base_row, col_mode = COMBOS[combo_idx]
    height, width = OBJECT_SHAPE[name]
    col0 = 3 if col_mode == "left" else 8 - width // 2
    return name, road_id, base_row, col0, height, width


def class_name(class_id: int) -> str:
    if 0 <= class_id < len(ROAD_NAMES):
        return ROAD_NAMES[class_id]
    if len(ROAD_NAMES) <= class_id < N_CLASSES:
        obj_idx, combo_idx = divmod(class_id - len(ROAD_NAMES), len(COMBOS))
        return f"{OBJECT_NAMES[obj_idx]}_{COMBOS[combo_idx][0]}"
    raise UnknownClass(f"class id {class_id}")


def class_footprint(class_id: int) -> np.ndarray:
    """Boolean mask the jitter applies to: the object, or everything."""
    if not 0 <= class_id < N_CLASSES:
        raise UnknownClass(f"class id {class_id}")
    if class_id < len(ROAD_NAMES):
        return np.ones((GRID, GRID), dtype=bool)
    _, _, base_row, col0, height, width = _object_placement(class_id)
    mask = np.zeros((GRID, GRID), dtype=bool)
    mask[base_row - height + 1:base_row + 1, col0:col0 + width] = True
    return mask


def compose_scene(class_id: int) -> DelayMap:
    """Deterministic depth composition of one class, before any jitter."""
    if not 0 <= class_id < N_CLASSES:
        raise UnknownClass(f"class id {class_id}")
    if class_id < len(ROAD_NAMES):
        depth = _road_template(class_id)
    else:
        _, road_id, base_row, col0, height, width = _object_placement(class_id)
        depth = _road_template(road_id)
        # object sits on the ground just in front of its base row's range
        obj_depth = _road_depth(base_row) * 0.82
        depth[base_row - height + 1:base_row + 1, col0:col0 + width] = obj_depth
    return DelayMap(delays=np.clip(depth / DEPTH_CAP, 0.0, 1.0), label=class_id)


def _shift_footprint(dmap: DelayMap, mask: np.ndarray, delta: float) -> DelayMap:
    delays = dmap.delays.copy()
    delays[mask] = np.clip(delays[mask] + delta, 0.0, 1.0)
    return DelayMap(delays=delays, label=dmap.label)


def apply_jitter(dmap: DelayMap, seed: int, amplitude: float = JITTER_AMPLITUDE) -> DelayMap:
    """One uniform depth offset on the class footprint, label unchanged."""
    if amplitude < 0:
        raise ValueError("jitter amplitude must be >= 0")
    rng = np.random.default_rng(seed)
    delta = float(rng.uniform(-amplitude, amplitude))
    return _shift_footprint(dmap, class_footprint(dmap.label), delta)


def render_scene(class_id: int, jitter_seed: int,
                 amplitude: float = JITTER_AMPLITUDE) -> DelayMap:
    """Compose a class template and apply its seeded jitter."""
    return apply_jitter(compose_scene(class_id), jitter_seed, amplitude)


def inject_noise(dmap: DelayMap, spec: NoiseSpec) -> DelayMap:
    """Additive per-pixel U[0, upper] noise; delays never decrease."""
    rng = np.random.default_rng(spec.seed)
    noisy = dmap.delays + rng.uniform(0.0, spec.upper, (GRID, GRID))
    return DelayMap(delays=np.clip(noisy, 0.0, 1.0), label=dmap.label)


def encode_delays(delays: np.ndarray, cfg: KernelConfig = KernelConfig()) -> np.ndarray:
    """Delay map -> flat spike-time vector in normalized kernel units."""
    d = np.asarray(delays, dtype=np.float64)
    return d.reshape(-1) * (T_MAX_US / cfg.tau_syn)


def decode_times(times: np.ndarray, cfg: KernelConfig = KernelConfig()) -> np.ndarray:
    """Inverse of encode_delays (flat vector of delays in [0, 1])."""
    return np.asarray(times, dtype=np.float64) * (cfg.tau_syn / T_MAX_US)


# --- dataset assembly and file format --------------------------------------

DATASET_FORMAT = "pulsenet-dataset v1"
_SPLIT_TAGS = {"train": 0, "test": 1}


@dataclass
class PulseDataset:
    """A stack of delay maps with labels and its generation provenance."""

    delays: np.ndarray   # (P, GRID, GRID) float64
    labels: np.ndarray   # (P,) int64
    noise_upper: float
    seed: int

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def times(self, cfg: KernelConfig = KernelConfig()) -> np.ndarray:
        """(P, 256) normalized spike times."""
        return encode_delays(self.delays.reshape(len(self), N_PIXELS), cfg) \
            .reshape(len(self), N_PIXELS)


def _pattern_seed(root: int, split: str, class_id: int, index: int, stage: int) -> int:
    ss = np.random.SeedSequence((int(root), _SPLIT_TAGS[split], class_id, index, stage))
    return int(ss.generate_state(1, np.uint64)[0])


def _make_split(n_per_class: int, noise_upper: float, seed: int, split: str) -> PulseDataset:
    delays = np.empty((N_CLASSES * n_per_class, GRID, GRID))
    labels = np.empty(N_CLASSES * n_per_class, dtype=np.int64)
    pos = 0
    for class_id in range(N_CLASSES):
        for index in range(n_per_class):
            dmap = render_scene(class_id, _pattern_seed(seed, split, class_id, index, 0))
            dmap = inject_noise(dmap, NoiseSpec(upper=noise_upper,
                                                seed=_pattern_seed(seed, split, class_id,
                                                                   index, 1)))
            delays[pos] = dmap.delays
            labels[pos] = class_id
            pos += 1
    return PulseDataset(delays=delays, labels=labels, noise_upper=noise_upper, seed=seed)


def generate_dataset(n_train_per_class: int, n_test_per_class: int,
                     noise_upper: float, seed: int):
    """Balanced train/test splits with disjoint per-pattern seed streams."""
    if n_train_per_class < 1 or n_test_per_class < 1:
        raise ValueError("per-class pattern counts must be >= 1")
    NoiseSpec(upper=noise_upper)  # bounds check
    train = _make_split(n_train_per_class, noise_upper, seed, "train")
    test = _make_split(n_test_per_class, noise_upper, seed, "test")
    return train, test


def save_dataset(dataset: PulseDataset, path) -> None:
    """Self-describing text format, one labeled pattern per line."""
    lines = [DATASET_FORMAT,
             f"grid {GRID}",
             f"classes {N_CLASSES}",
             f"noise {dataset.noise_upper:.17g}",
             f"seed {dataset.seed}",
             f"patterns {len(dataset)}"]
    flat = dataset.delays.reshape(len(dataset), N_PIXELS)
    for label, row in zip(dataset.labels, flat):
        lines.append(str(int(label)) + " " + " ".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(path) -> PulseDataset:
    with open(path, encoding="ascii") as fh:
        header = [fh.readline().rstrip("\n") for _ in range(6)]
        if header[0] != DATASET_FORMAT:
            raise ValueError(f"{path}: not a {DATASET_FORMAT} file")
        grid = int(header[1].split()[1])
        n_classes = int(header[2].split()[1])
        if grid != GRID or n_classes != N_CLASSES:
            raise ValueError(f"{path}: unsupported grid {grid} / classes {n_classes}")
        noise_upper = float(header[3].split()[1])
        seed = int(header[4].split()[1])
        n_patterns = int(header[5].split()[1])
        delays = np.empty((n_patterns, GRID, GRID))
        labels = np.empty(n_patterns, dtype=np.int64)
        for i in range(n_patterns):
            parts = fh.readline().split()
            if len(parts) != 1 + N_PIXELS:
                raise ValueError(f"{path}: pattern line {i} has {len(parts)} fields")
            labels[i] = int(parts[0])
            delays[i] = np.array(parts[1:], dtype=np.float64).reshape(GRID, GRID)
    return PulseDataset(delays=delays, labels=labels, noise_upper=noise_upper, seed=seed)


def write_class_table(path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("id,name\n")
        for class_id in range(N_CLASSES):
            fh.write(f"{class_id},{class_name(class_id)}\n")


def centroid_baseline_accuracy(train: PulseDataset, test: PulseDataset) -> float:
    """Nearest-centroid floor on raw delay vectors, a sanity bound on the task."""
    flat_tr = train.delays.reshape(len(train), N_PIXELS)
    flat_te = test.delays.reshape(len(test), N_PIXELS)
    centroids = np.stack([flat_tr[train.labels == c].mean(axis=0)
                          for c in range(N_CLASSES)])
    d2 = ((flat_te[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return float(np.mean(np.argmin(d2, axis=1) == test.labels))
