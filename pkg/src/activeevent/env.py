"""Seeded 2D arena with an embodied pinhole camera and one scripted target.

World frame is centered on the arena; heading 0 looks along +x and positive
angles turn right (clockwise on screen), so a target at positive bearing
projects into the right half of the frame.
"""

from __future__ import annotations

import copy
import enum
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatError


class Action(enum.IntEnum):
    FORWARD = 0
    BACKWARD = 1
    STOP = 2
    TURN_LEFT = 3
    TURN_RIGHT = 4
    FORWARD_LEFT = 5
    FORWARD_RIGHT = 6


N_ACTIONS = len(Action)


class EventKind(enum.IntEnum):
    WALK_STRAIGHT = 0
    TURN = 1
    STOP = 2


EVENT_NAMES = {EventKind.WALK_STRAIGHT: "walk", EventKind.TURN: "turn", EventKind.STOP: "stop"}


def wrap_angle(a: float) -> float:
    """Map an angle into [-pi, pi)."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a < 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass
class EnvConfig:
    world_size: float = 8.0
    frame_px: int = 56
    agent_step: float = 0.2
    agent_turn: float = math.pi / 12
    fov: float = math.pi / 2
    target_speed: float = 0.05
    event_dwell_range: tuple[int, int] = (40, 120)
    seed: int = 0
    nominal_distance: float = 2.0
    target_present: bool = True
    target_turn_rate: float = math.pi / 40
    target_height: float = 1.7
    target_width: float = 0.6

    def validate(self) -> None:
        if not self.world_size > 0:
            raise ConfigError("env.world_size", "must be > 0")
        if int(self.frame_px) != self.frame_px or self.frame_px < 16:
            raise ConfigError("env.frame_px", "must be an integer >= 16")
        if not 0 < self.fov < math.pi:
            raise ConfigError("env.fov", "must lie in (0, pi)")
        if not self.agent_step > 0:
            raise ConfigError("env.agent_step", "must be > 0")
        if not self.agent_turn > 0:
            raise ConfigError("env.agent_turn", "must be > 0")
        if self.target_speed < 0:
            raise ConfigError("env.target_speed", "must be >= 0")
        lo, hi = self.event_dwell_range
        if not (1 <= lo <= hi):
            raise ConfigError("env.event_dwell_range", "need 1 <= min <= max")
        if not self.nominal_distance > 0:
            raise ConfigError("env.nominal_distance", "must be > 0")
        if self.seed < 0:
            raise ConfigError("env.seed", "must be unsigned")

    @property
    def focal_px(self) -> float:
        return (self.frame_px / 2.0) / math.tan(self.fov / 2.0)


@dataclass
class AgentPose:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0


@dataclass
class TargetScript:
    current_event: EventKind
    dwell_remaining: int
    rng: np.random.Generator
    event_log: list[tuple[int, EventKind]] = field(default_factory=list)
    turn_sign: float = 1.0

    def sample_next(self, step: int, dwell_range: tuple[int, int]) -> None:
        # uniform over the other two kinds so logged segments never repeat
        choices = [k for k in EventKind if k != self.current_event]
        self.current_event = choices[int(self.rng.integers(len(choices)))]
        self.dwell_remaining = int(self.rng.integers(dwell_range[0], dwell_range[1] + 1))
        self.turn_sign = 1.0 if self.rng.random() < 0.5 else -1.0
        self.event_log.append((step, self.current_event))


@dataclass
class StepInfo:
    target_visible: bool
    target_centroid_px: tuple[float, float] | None
    gt_event_kind: EventKind
    gt_boundary: bool
    extrinsic_reward: float


def _background_texture(rng: np.random.Generator, rows: int, n_terms: int = 6):
    """Smooth periodic panorama: returns f(theta[cols]) -> rows x cols."""
    ks = np.arange(1, n_terms + 1)
    amp = rng.uniform(0.4, 1.0, n_terms) / ks
    phase = rng.uniform(0.0, 2 * np.pi, n_terms)
    row_gain = 0.6 + 0.4 * np.cos(np.linspace(0.0, np.pi, rows) * rng.uniform(1.0, 3.0))
    row_base = np.where(np.arange(rows) < rows // 2, 0.34, 0.26)
    scale = 0.06 / amp.sum()

    def texture(theta: np.ndarray) -> np.ndarray:
        wave = (amp[:, None] * np.sin(ks[:, None] * theta[None, :] + phase[:, None])).sum(0)
        return row_base[:, None] + scale * row_gain[:, None] * wave[None, :]

    return texture


class ArenaEnv:
    """Environment instance. All randomness flows from ``config.seed``."""

    def __init__(self, config: EnvConfig):
        config.validate()
        self.config = config
        rng = np.random.default_rng(config.seed)
        self._texture = _background_texture(rng, config.frame_px)
        px = config.frame_px
        self._cols = np.arange(px) + 0.5
        self._col_bearing = np.arctan((self._cols - px / 2.0) / config.focal_px)
        self.pose = AgentPose(0.0, 0.0, 0.0)
        self.step_count = 0
        # target starts inside the central half of the FOV
        dist = rng.uniform(1.5, 3.0)
        bearing = rng.uniform(-config.fov / 4, config.fov / 4)
        self.target_xy = np.array([dist * math.cos(bearing), dist * math.sin(bearing)])
        self.target_heading = wrap_angle(rng.uniform(-math.pi, math.pi))
        script_rng = np.random.default_rng(rng.integers(2**63))
        first = EventKind(int(script_rng.integers(len(EventKind))))
        lo, hi = config.event_dwell_range
        self.script = TargetScript(first, int(script_rng.integers(lo, hi + 1)), script_rng)
        self.script.event_log.append((0, first))

    def clone(self) -> "ArenaEnv":
        return copy.deepcopy(self)

    # geometry ---------------------------------------------------------
    def target_polar(self) -> tuple[float, float]:
        """(distance, bearing) of the target relative to the agent."""
        dx = self.target_xy[0] - self.pose.x
        dy = self.target_xy[1] - self.pose.y
        return math.hypot(dx, dy), wrap_angle(math.atan2(dy, dx) - self.pose.heading)

    def target_visible(self) -> bool:
        if not self.config.target_present:
            return False
        dist, bearing = self.target_polar()
        return abs(bearing) < self.config.fov / 2 and dist * math.cos(bearing) > 0.1

    def project(self) -> tuple[float, float, float, float] | None:
        """Screen ellipse (u, v, half_w, half_h) in pixels, or None if behind."""
        dist, bearing = self.target_polar()
        depth = dist * math.cos(bearing)
        if not self.config.target_present or depth <= 0.1:
            return None
        f = self.config.focal_px
        px = self.config.frame_px
        u = px / 2.0 + f * dist * math.sin(bearing) / depth
        return u, px / 2.0, f * self.config.target_width / 2 / depth, f * self.config.target_height / 2 / depth

    # dynamics ---------------------------------------------------------
    def _move_agent(self, action: Action) -> None:
        cfg = self.config
        p = self.pose
        if action in (Action.FORWARD, Action.FORWARD_LEFT, Action.FORWARD_RIGHT):
            p.x += cfg.agent_step * math.cos(p.heading)
            p.y += cfg.agent_step * math.sin(p.heading)
        elif action == Action.BACKWARD:
            p.x -= cfg.agent_step * math.cos(p.heading)
            p.y -= cfg.agent_step * math.sin(p.heading)
        if action in (Action.TURN_LEFT, Action.FORWARD_LEFT):
            p.heading = wrap_angle(p.heading - cfg.agent_turn)
        elif action in (Action.TURN_RIGHT, Action.FORWARD_RIGHT):
            p.heading = wrap_angle(p.heading + cfg.agent_turn)
        half = cfg.world_size / 2
        p.x = min(max(p.x, -half), half)
        p.y = min(max(p.y, -half), half)

    def _move_target(self) -> None:
        cfg = self.config
        event = self.script.current_event
        if event == EventKind.STOP:
            return
        speed = cfg.target_speed
        if event == EventKind.TURN:
            self.target_heading = wrap_angle(self.target_heading + self.script.turn_sign * cfg.target_turn_rate)
            speed *= 0.5
        step = speed * np.array([math.cos(self.target_heading), math.sin(self.target_heading)])
        nxt = self.target_xy + step
        lim = cfg.world_size / 2 - 0.5
        cx, cy = math.cos(self.target_heading), math.sin(self.target_heading)
        if abs(nxt[0]) > lim:
            cx = -cx
        if abs(nxt[1]) > lim:
            cy = -cy
        if abs(nxt[0]) > lim or abs(nxt[1]) > lim:
            self.target_heading = math.atan2(cy, cx)
            nxt = self.target_xy + speed * np.array([cx, cy])
        self.target_xy = np.clip(nxt, -lim, lim)

    def step(self, action) -> tuple[np.ndarray, StepInfo]:
        action = Action(int(action))
        k = self.step_count
        boundary = False
        if self.script.dwell_remaining <= 0:
            self.script.sample_next(k, self.config.event_dwell_range)
            boundary = True
        event = self.script.current_event
        self._move_agent(action)
        self._move_target()
        self.script.dwell_remaining -= 1
        self.step_count += 1
        obs = self.render()
        return obs, self.info(event, boundary)

    def info(self, event=None, boundary=False) -> StepInfo:
        visible = self.target_visible()
        centroid = None
        if visible:
            u, v, _, _ = self.project()
            centroid = (u, v)
        return StepInfo(
            target_visible=visible,
            target_centroid_px=centroid,
            gt_event_kind=self.script.current_event if event is None else event,
            gt_boundary=boundary,
            extrinsic_reward=self.extrinsic_reward(),
        )

    def extrinsic_reward(self) -> float:
        if not self.target_visible():
            return -1.0
        dist, bearing = self.target_polar()
        r = 1.0 - dist / self.config.nominal_distance - abs(bearing) / (self.config.fov / 2)
        return min(1.0, max(-1.0, r))

    # rendering --------------------------------------------------------
    def background(self) -> np.ndarray:
        return self._texture(self.pose.heading + self._col_bearing)

    def render(self) -> np.ndarray:
        frame = self.background()
        proj = self.project()
        if proj is not None:
            u, v, hw, hh = proj
            px = self.config.frame_px
            c0, c1 = max(0, int(math.floor(u - hw))), min(px, int(math.ceil(u + hw)) + 1)
            if c0 < c1:
                rows = np.arange(px) + 0.5
                cols = self._cols[c0:c1]
                r2 = ((cols[None, :] - u) / hw) ** 2 + ((rows[:, None] - v) / hh) ** 2
                mask = np.clip(2.0 * (1.0 - r2), 0.0, 1.0)
                dist, bearing = self.target_polar()
                to_agent = math.atan2(self.pose.y - self.target_xy[1], self.pose.x - self.target_xy[0])
                shade = 0.75 + 0.2 * math.cos(self.target_heading - to_agent)
                frame[:, c0:c1] = frame[:, c0:c1] * (1.0 - mask) + shade * mask
        return np.clip(frame, 0.0, 1.0)


def env_init(config: EnvConfig) -> ArenaEnv:
    return ArenaEnv(config)


def write_pgm(path, frame: np.ndarray) -> None:
    """Binary PGM (P5, maxval 255)."""
    data = np.round(np.clip(frame, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if m is None:
        raise FormatError(f"{path}: not a P5 PGM file")
    w, h, maxval = (int(g) for g in m.groups())
    data = raw[m.end() : m.end() + w * h]
    if len(data) != w * h:
        raise FormatError(f"{path}: truncated PGM data")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w).astype(np.float64) / maxval
