"""Deterministic 2D pick-and-place world with two visually distinct agents.

The world is a unit table seen top-down: objects spawn on the left, four
fixed bins sit on the right, and a gripper with scalar height z moves under
4D delta actions (dx, dy, dz, grip), each clamped to [-1, 1]. Grasping is
kinematic (snap-to-gripper): closing near an object while low picks it up,
opening drops it in place. Demonstration episodes render a red two-segment
arm, imitation episodes a white three-segment arm, so context video and
observation stream differ in morphology and color.

Everything is pure float64 numpy and deterministic given (seed, actions).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

MAX_STEP = 0.05
GRASP_RADIUS = 0.03
GRASP_HEIGHT = 0.05
LIFT_HEIGHT = 0.05
REACH_DIST = 0.03
CARRY_Z = 0.5
PICK_Z = 0.01
HOME = (0.5, 0.5, 0.6)
HORIZON = 150
IMAGE_HW = 64

OBJECT_REGION = (0.08, 0.50, 0.15, 0.85)  # x0, x1, y0, y1
BIN_X = (0.66, 0.94)
BIN_ROWS = ((0.04, 0.24), (0.28, 0.48), (0.52, 0.72), (0.76, 0.96))

DEMONSTRATOR = "demonstrator"
IMITATOR = "imitator"

_TABLE_COLOR = (54, 54, 64)
_BIN_COLOR = (150, 150, 158)
_AGENT_COLORS = {DEMONSTRATOR: (214, 58, 49), IMITATOR: (233, 233, 233)}


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ObjectSpec:
    shape: str  # box | disc | triangle | capsule
    color: tuple[int, int, int]
    size: float  # world-unit radius


@dataclass(frozen=True)
class Task:
    object_index: int
    bin_index: int

    @property
    def id(self) -> str:
        return f"obj{self.object_index}_bin{self.bin_index}"


BASE_OBJECTS = (
    ObjectSpec("box", (66, 196, 86), 0.040),
    ObjectSpec("disc", (72, 124, 235), 0.040),
    ObjectSpec("triangle", (238, 204, 62), 0.044),
    ObjectSpec("capsule", (226, 74, 222), 0.042),
)


def base_tasks(n_objects: int = 4) -> list[Task]:
    return [Task(o, b) for o in range(n_objects) for b in range(4)]


def procedural_objects(n: int = 30, seed: int = 0) -> list[ObjectSpec]:
    """Procedurally colored/shaped object catalog for the multi-object mode.

    Hues are golden-ratio spaced and keep clear of the red band used by the
    demonstrator arm. By convention the first 26 are the train split and the
    last 4 are test-only.
    """
    import colorsys

    rng = np.random.default_rng(seed)
    shapes = ["box", "disc", "triangle", "capsule"]
    out = []
    hue = 0.11
    for i in range(n):
        hue = (hue + 0.61803398875) % 1.0
        if hue > 0.93 or hue < 0.05:  # stay off the demonstrator's red
            hue = (hue + 0.12) % 1.0
        sat = 0.75 + 0.2 * rng.random()
        val = 0.75 + 0.2 * rng.random()
        rgb = tuple(int(255 * c) for c in colorsys.hsv_to_rgb(hue, sat, val))
        size = float(rng.uniform(0.034, 0.046))
        out.append(ObjectSpec(shapes[i % 4], rgb, size))
    return out


@dataclass
class GripperState:
    position: np.ndarray  # (x, y)
    z: float
    closed: bool = False
    held_object: int | None = None


@dataclass
class WorldState:
    objects: list[ObjectSpec]
    positions: np.ndarray  # [n_objects, 2]
    gripper: GripperState
    agent: str = IMITATOR

    def copy(self) -> "WorldState":
        return WorldState(
            objects=list(self.objects),
            positions=self.positions.copy(),
            gripper=replace(self.gripper, position=self.gripper.position.copy()),
            agent=self.agent,
        )


def bin_rect(bin_index: int) -> tuple[float, float, float, float]:
    y0, y1 = BIN_ROWS[bin_index]
    return (BIN_X[0], BIN_X[1], y0, y1)


def bin_center(bin_index: int) -> np.ndarray:
    x0, x1, y0, y1 = bin_rect(bin_index)
    return np.array([(x0 + x1) / 2, (y0 + y1) / 2])


def in_rect(p, rect) -> bool:
    x0, x1, y0, y1 = rect
    return bool(x0 <= p[0] <= x1 and y0 <= p[1] <= y1)


def reset(
    task: Task,
    seed: int,
    objects=BASE_OBJECTS,
    agent: str = IMITATOR,
    hw: int = IMAGE_HW,
) -> tuple[WorldState, np.ndarray]:
    """New episode: sampled object layout, gripper at home. Returns (state, frame).

    The task object's position is drawn first, exactly uniform over the
    spawn region; distractors are rejection-sampled against already placed
    objects so no two overlap.
    """
    state = reset_state(task, seed, objects, agent)
    return state, render(state, hw)


def reset_state(task: Task, seed: int, objects=BASE_OBJECTS, agent: str = IMITATOR) -> WorldState:
    if not 0 <= task.object_index < len(objects):
        raise ValueError(f"object index {task.object_index} out of range")
    if not 0 <= task.bin_index < 4:
        raise ValueError(f"bin index {task.bin_index} out of range")
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = OBJECT_REGION
    n = len(objects)
    positions = np.zeros((n, 2))
    order = [task.object_index] + [i for i in range(n) if i != task.object_index]
    placed: list[int] = []
    for idx in order:
        for attempt in range(1000):
            p = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
            sep_ok = all(
                np.linalg.norm(p - positions[j]) >= objects[idx].size + objects[j].size + 0.01
                for j in placed
            )
            if sep_ok:
                positions[idx] = p
                placed.append(idx)
                break
        else:
            raise SimulationError(f"could not place object {idx} after 1000 attempts")
    gripper = GripperState(position=np.array(HOME[:2]), z=HOME[2], closed=False, held_object=None)
    return WorldState(objects=list(objects), positions=positions, gripper=gripper, agent=agent)


def step_state(state: WorldState, action) -> WorldState:
    """Kinematic update; actions are clamped componentwise to [-1, 1]."""
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    new = state.copy()
    g = new.gripper
    g.position = np.clip(g.position + a[:2] * MAX_STEP, 0.0, 1.0)
    g.z = float(np.clip(g.z + a[2] * MAX_STEP, 0.0, 1.0))
    close = bool(a[3] > 0)

    if g.held_object is not None:
        if close:
            new.positions[g.held_object] = g.position.copy()
        else:
            g.held_object = None  # release: object stays where dropped
    elif close and g.z < GRASP_HEIGHT:
        dists = np.linalg.norm(new.positions - g.position[None, :], axis=1)
        nearest = int(np.argmin(dists))
        if dists[nearest] < GRASP_RADIUS:
            g.held_object = nearest
            new.positions[nearest] = g.position.copy()
    g.closed = close
    return new


def step(state: WorldState, action, hw: int = IMAGE_HW) -> tuple[WorldState, np.ndarray]:
    new = step_state(state, action)
    return new, render(new, hw)


# ---------------------------------------------------------------------------
# scripted expert

PHASE_MOVE_ABOVE = 0
PHASE_DESCEND = 1
PHASE_GRASP = 2
PHASE_LIFT = 3
PHASE_MOVE_TO_BIN = 4
PHASE_RELEASE = 5
PHASE_DONE = 6


def expert_phase(state: WorldState, task: Task) -> int:
    """Stateless finite-state controller phase, derived from world state."""
    g = state.gripper
    target = bin_center(task.bin_index)
    if g.held_object == task.object_index:
        if g.z < CARRY_Z - 0.02 and np.linalg.norm(g.position - target) > 0.02:
            return PHASE_LIFT
        if np.linalg.norm(g.position - target) > 0.02:
            return PHASE_MOVE_TO_BIN
        return PHASE_RELEASE
    obj_p = state.positions[task.object_index]
    if in_rect(obj_p, bin_rect(task.bin_index)) and g.held_object is None:
        return PHASE_DONE
    planar = np.linalg.norm(g.position - obj_p)
    if planar > 0.012:
        return PHASE_MOVE_ABOVE
    if g.z > PICK_Z + 0.005:
        return PHASE_DESCEND
    return PHASE_GRASP


def expert_policy(state: WorldState, task: Task) -> np.ndarray:
    """Privileged pick-place controller emitting clamped continuous actions."""
    g = state.gripper
    obj_p = state.positions[task.object_index]
    phase = expert_phase(state, task)

    def toward(tx, ty, tz, grip):
        d = np.array([tx - g.position[0], ty - g.position[1], tz - g.z])
        return np.append(np.clip(d / MAX_STEP, -1.0, 1.0), grip)

    if phase == PHASE_MOVE_ABOVE:
        return toward(obj_p[0], obj_p[1], CARRY_Z, -1.0)
    if phase == PHASE_DESCEND:
        return toward(obj_p[0], obj_p[1], PICK_Z, -1.0)
    if phase == PHASE_GRASP:
        return np.array([0.0, 0.0, 0.0, 1.0])
    if phase == PHASE_LIFT:
        return toward(g.position[0], g.position[1], CARRY_Z, 1.0)
    if phase == PHASE_MOVE_TO_BIN:
        bc = bin_center(task.bin_index)
        return toward(bc[0], bc[1], CARRY_Z, 1.0)
    if phase == PHASE_RELEASE:
        return np.array([0.0, 0.0, 0.0, -1.0])
    return np.zeros(4)


def staged_success(states: list[WorldState], task: Task) -> tuple[bool, bool, bool]:
    """Reach / pick / place decomposition over a state trajectory.

    reached: gripper came within REACH_DIST of the target object (planar);
    picked: object was held while lifted above LIFT_HEIGHT;
    placed: final object position is inside the target bin. The stages are
    closed under implication so placed => picked => reached always holds.
    """
    if not states:
        raise ValueError("empty trajectory")
    idx = task.object_index
    reached = False
    picked = False
    for s in states:
        d = np.linalg.norm(s.gripper.position - s.positions[idx])
        if d < REACH_DIST:
            reached = True
        if s.gripper.held_object == idx and s.gripper.z > LIFT_HEIGHT:
            picked = True
    picked = picked and reached
    placed = picked and in_rect(states[-1].positions[idx], bin_rect(task.bin_index))
    return reached, picked, placed


def rollout_expert(
    task: Task,
    seed: int,
    objects=BASE_OBJECTS,
    agent: str = DEMONSTRATOR,
    max_steps: int = HORIZON,
    record_frames: bool = True,
    hw: int = IMAGE_HW,
    wrong_bin: int | None = None,
):
    """Run the scripted expert from a fresh reset.

    Returns (states, actions, frames); frames is None when not recorded.
    ``wrong_bin`` substitutes the expert's destination (used to script
    deliberate failure rollouts) while success is still judged on ``task``.
    """
    state = reset_state(task, seed, objects, agent)
    drive_task = task if wrong_bin is None else Task(task.object_index, wrong_bin)
    states = [state]
    actions = []
    frames = [render(state, hw)] if record_frames else None
    for _ in range(max_steps):
        if expert_phase(state, drive_task) == PHASE_DONE:
            break
        a = expert_policy(state, drive_task)
        state = step_state(state, a)
        states.append(state)
        actions.append(a)
        if record_frames:
            frames.append(render(state, hw))
    return states, actions, frames


# ---------------------------------------------------------------------------
# rendering

_grid_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _grid(hw: int):
    if hw not in _grid_cache:
        cols = (np.arange(hw) + 0.5) / hw
        rows = 1.0 - (np.arange(hw) + 0.5) / hw
        x, y = np.meshgrid(cols, rows)
        _grid_cache[hw] = (x, y)
    return _grid_cache[hw]


def _disc(x, y, cx, cy, r):
    return (x - cx) ** 2 + (y - cy) ** 2 <= r * r


def _rect(x, y, rect):
    x0, x1, y0, y1 = rect
    return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)


def _segment(x, y, p0, p1, halfwidth):
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    d = p1 - p0
    L2 = float(d @ d)
    if L2 < 1e-12:
        return _disc(x, y, p0[0], p0[1], halfwidth)
    t = ((x - p0[0]) * d[0] + (y - p0[1]) * d[1]) / L2
    t = np.clip(t, 0.0, 1.0)
    px = p0[0] + t * d[0]
    py = p0[1] + t * d[1]
    return (x - px) ** 2 + (y - py) ** 2 <= halfwidth * halfwidth


def _object_mask(x, y, spec: ObjectSpec, p):
    cx, cy, r = p[0], p[1], spec.size
    if spec.shape == "box":
        return _rect(x, y, (cx - r, cx + r, cy - r, cy + r))
    if spec.shape == "disc":
        return _disc(x, y, cx, cy, r)
    if spec.shape == "triangle":
        ax, ay = cx, cy + r
        bx, by = cx - 0.95 * r, cy - 0.75 * r
        cx2, cy2 = cx + 0.95 * r, cy - 0.75 * r
        d1 = (x - bx) * (ay - by) - (y - by) * (ax - bx)
        d2 = (x - cx2) * (by - cy2) - (y - cy2) * (bx - cx2)
        d3 = (x - ax) * (cy2 - ay) - (y - ay) * (cx2 - ax)
        neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
        pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
        return ~(neg & pos)
    if spec.shape == "capsule":
        return _segment(x, y, (cx - 0.5 * r, cy), (cx + 0.5 * r, cy), 0.75 * r)
    raise ValueError(f"unknown shape {spec.shape}")


def _gripper_radius(z: float) -> float:
    return 0.040 + 0.050 * z  # taller gripper sits nearer the camera


def _arm_joints(state: WorldState):
    g = np.array([state.gripper.position[0], state.gripper.position[1]])
    if state.agent == DEMONSTRATOR:
        base = np.array([0.5, 0.015])
        v = g - base
        L = np.linalg.norm(v)
        perp = np.array([-v[1], v[0]]) / (L + 1e-9)
        elbow = base + 0.55 * v + 0.18 * L * perp
        return [base, elbow, g]
    base = np.array([0.5, 0.985])
    v = g - base
    L = np.linalg.norm(v)
    perp = np.array([-v[1], v[0]]) / (L + 1e-9)
    j1 = base + 0.34 * v + 0.16 * L * perp
    j2 = base + 0.70 * v - 0.12 * L * perp
    return [base, j1, j2, g]


def agent_pixel_mask(state: WorldState, hw: int = IMAGE_HW) -> np.ndarray:
    """Boolean mask of pixels covered by the agent's arm and gripper."""
    x, y = _grid(hw)
    mask = np.zeros((hw, hw), dtype=bool)
    joints = _arm_joints(state)
    halfwidth = 0.016 if state.agent == DEMONSTRATOR else 0.013
    for p0, p1 in zip(joints[:-1], joints[1:]):
        mask |= _segment(x, y, p0, p1, halfwidth)
    g = state.gripper
    r = _gripper_radius(g.z)
    if state.agent == DEMONSTRATOR:
        mask |= _disc(x, y, g.position[0], g.position[1], r)
    else:
        mask |= _rect(x, y, (g.position[0] - r, g.position[0] + r, g.position[1] - r, g.position[1] + r))
    return mask


def render(state: WorldState, hw: int = IMAGE_HW) -> np.ndarray:
    """Deterministic top-down rasterization to an RGB uint8 [hw, hw, 3] frame."""
    x, y = _grid(hw)
    img = np.empty((hw, hw, 3), dtype=np.uint8)
    img[:] = _TABLE_COLOR

    inset = 0.018
    for b in range(4):
        x0, x1, y0, y1 = bin_rect(b)
        outline = _rect(x, y, (x0, x1, y0, y1)) & ~_rect(
            x, y, (x0 + inset, x1 - inset, y0 + inset, y1 - inset)
        )
        img[outline] = _BIN_COLOR

    held = state.gripper.held_object
    for i, (spec, p) in enumerate(zip(state.objects, state.positions)):
        if i == held:
            continue
        img[_object_mask(x, y, spec, p)] = spec.color

    color = _AGENT_COLORS[state.agent]
    joints = _arm_joints(state)
    halfwidth = 0.016 if state.agent == DEMONSTRATOR else 0.013
    for p0, p1 in zip(joints[:-1], joints[1:]):
        img[_segment(x, y, p0, p1, halfwidth)] = color

    g = state.gripper
    gx, gy = g.position
    r = _gripper_radius(g.z)
    band = 0.022 if g.closed else 0.010
    if state.agent == DEMONSTRATOR:
        ring = _disc(x, y, gx, gy, r) & ~_disc(x, y, gx, gy, max(r - band, 0.0))
    else:
        outer = _rect(x, y, (gx - r, gx + r, gy - r, gy + r))
        rin = max(r - band, 0.0)
        ring = outer & ~_rect(x, y, (gx - rin, gx + rin, gy - rin, gy + rin))
    img[ring] = color

    if held is not None:
        spec = state.objects[held]
        img[_object_mask(x, y, spec, state.positions[held])] = spec.color
    return img


def gripper_pixel(state: WorldState, hw: int = IMAGE_HW) -> tuple[int, int]:
    """(u, v) = (column, row) of the gripper center under the render camera."""
    u = int(np.clip(np.rint(state.gripper.position[0] * hw - 0.5), 0, hw - 1))
    v = int(np.clip(np.rint((1.0 - state.gripper.position[1]) * hw - 0.5), 0, hw - 1))
    return u, v
