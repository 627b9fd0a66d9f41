"""
Pixel Point-Mass - a damped point in the unit box that should reach a fixed goal.
"""

import math
from typing import Tuple

import numpy as np

NAME = 'pixel-pointmass'
ACTION_DIM = 2

DT = 0.05
VELOCITY_DECAY = 0.9
ACTION_GAIN = 0.1
GOAL = np.array([0.5, 0.5])
MAX_DISTANCE = math.sqrt(8.0)   # box diagonal

IMAGE_SIZE = 40
AGENT_INTENSITY = 1.0
GOAL_INTENSITY = 0.5


def initial_physics(rng: np.random.Generator) -> np.ndarray:
    """[x, y, vx, vy] with position uniform in the box and zero velocity."""
    position = rng.uniform(-1.0, 1.0, size=2)
    return np.concatenate([position, np.zeros(2)])


def reward_at(position: np.ndarray) -> float:
    return 1.0 - float(np.linalg.norm(position - GOAL)) / MAX_DISTANCE


def step_physics(physics: np.ndarray, action: np.ndarray) -> Tuple[np.ndarray, float]:
    position, velocity = physics[:2], physics[2:]
    velocity = VELOCITY_DECAY * velocity + ACTION_GAIN * np.asarray(action, dtype=np.float64)
    position = np.clip(position + velocity * DT, -1.0, 1.0)
    return np.concatenate([position, velocity]), reward_at(position)


def _to_pixel(coord: float, flip: bool) -> int:
    # Centers stay in [1, IMAGE_SIZE - 2] so the 3x3 square always fits.
    unit = (coord + 1.0) / 2.0
    if flip:
        unit = 1.0 - unit
    return 1 + int(round(unit * (IMAGE_SIZE - 3)))


def _stamp(image: np.ndarray, position: np.ndarray, intensity: float):
    col = _to_pixel(float(position[0]), flip=False)
    row = _to_pixel(float(position[1]), flip=True)
    image[row - 1:row + 2, col - 1:col + 2] = intensity


def render(physics: np.ndarray) -> np.ndarray:
    """Goal square (0.5) drawn first, agent square (1.0) over it, on a 0.0 background."""
    image = np.zeros((IMAGE_SIZE, IMAGE_SIZE))
    _stamp(image, GOAL, GOAL_INTENSITY)
    _stamp(image, physics[:2], AGENT_INTENSITY)
    return image
