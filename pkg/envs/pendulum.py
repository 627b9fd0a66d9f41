"""
Pixel Pendulum - swing-up pendulum rendered as a 40x40 grayscale rod image.

Angle 0 is upright; reward is cos(angle) after each step.
"""

import math
from typing import Tuple

import numpy as np

NAME = 'pixel-pendulum'
ACTION_DIM = 1

GRAVITY = 10.0
LENGTH = 1.0
MASS = 1.0
MAX_TORQUE = 2.0
MAX_SPEED = 8.0
DT = 0.05

IMAGE_SIZE = 40
ROD_PIXELS = 16.0
ROD_SAMPLES = 64


def initial_physics(rng: np.random.Generator) -> np.ndarray:
    """[angle, angular velocity] with angle ~ U(-pi, pi), velocity ~ U(-1, 1)."""
    angle = rng.uniform(-math.pi, math.pi)
    velocity = rng.uniform(-1.0, 1.0)
    return np.array([angle, velocity])


def wrap_angle(angle: float) -> float:
    return ((angle + math.pi) % (2.0 * math.pi)) - math.pi


def step_physics(physics: np.ndarray, action: np.ndarray) -> Tuple[np.ndarray, float]:
    """Semi-implicit Euler: velocity first (clipped to +/-8 rad/s), then angle."""
    angle, velocity = float(physics[0]), float(physics[1])
    u = float(action[0])
    accel = (-3.0 * GRAVITY / (2.0 * LENGTH) * math.sin(angle + math.pi)
             + 3.0 * u * MAX_TORQUE / (MASS * LENGTH ** 2))
    velocity = min(max(velocity + accel * DT, -MAX_SPEED), MAX_SPEED)
    angle = wrap_angle(angle + velocity * DT)
    return np.array([angle, velocity]), math.cos(angle)


def render(physics: np.ndarray) -> np.ndarray:
    """A 2-pixel-wide rod of intensity 1.0 from the image center toward the angle."""
    image = np.zeros((IMAGE_SIZE, IMAGE_SIZE))
    angle = float(physics[0])
    center = IMAGE_SIZE / 2.0
    s = np.linspace(0.0, ROD_PIXELS, ROD_SAMPLES)
    xs = center + s * math.sin(angle)
    ys = center - s * math.cos(angle)
    for dx in (-0.5, 0.5):
        for dy in (-0.5, 0.5):
            cols = np.clip(np.floor(xs + dx).astype(int), 0, IMAGE_SIZE - 1)
            rows = np.clip(np.floor(ys + dy).astype(int), 0, IMAGE_SIZE - 1)
            image[rows, cols] = 1.0
    return image
