"""Unit quaternions, proper Euler (Davenport) angles and rotation subgoal plans.

Quaternions are stored as ``(w, x, y, z)`` with the Hamilton convention and act
on column vectors, so ``a * b`` means "apply ``b`` first, then ``a``" in the
fixed world frame.  Rotation matrices only exist to cross-check results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CONVENTIONS = ("zxz", "zyz")

# elementary rotations below this magnitude are left out of a subgoal plan
MIN_PLAN_ANGLE = 1e-6
# sin(beta) below this is treated as gimbal lock
DEGENERATE_SIN_BETA = 1e-9

_AXES = {"x": 0, "y": 1, "z": 2}


def _canonical(w, x, y, z):
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if not n > 0.0 or not math.isfinite(n):
        raise ValueError("quaternion must be finite and non-zero")
    w, x, y, z = w / n, x / n, y / n, z / n
    flip = w < 0.0
    if w == 0.0:
        for c in (x, y, z):
            if c != 0.0:
                flip = c < 0.0
                break
    if flip:
        w, x, y, z = -w, -x, -y, -z
    # avoid negative zeros so equal rotations compare and print equal
    return w + 0.0, x + 0.0, y + 0.0, z + 0.0


@dataclass(frozen=True)
class UnitQuaternion:
    """A rotation as a unit quaternion, normalised and sign-canonicalised on construction."""

    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        w, x, y, z = _canonical(float(self.w), float(self.x), float(self.y), float(self.z))
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @classmethod
    def identity(cls) -> UnitQuaternion:
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, q) -> UnitQuaternion:
        w, x, y, z = (float(v) for v in q)
        return cls(w, x, y, z)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> UnitQuaternion:
        axis = np.asarray(axis, dtype=np.float64)
        n = np.linalg.norm(axis)
        if n == 0.0:
            return cls.identity()
        s = math.sin(0.5 * angle) / n
        return cls(math.cos(0.5 * angle), axis[0] * s, axis[1] * s, axis[2] * s)

    @classmethod
    def from_rotvec(cls, rotvec) -> UnitQuaternion:
        """Exponential map: rotation of ``|v|`` radians about ``v / |v|``."""
        v = np.asarray(rotvec, dtype=np.float64)
        angle = float(np.linalg.norm(v))
        if angle < 1e-12:
            # second-order expansion; exact to machine precision at this size
            return cls(1.0 - angle * angle / 8.0, 0.5 * v[0], 0.5 * v[1], 0.5 * v[2])
        return cls.from_axis_angle(v, angle)

    @classmethod
    def elementary(cls, axis: str, angle: float) -> UnitQuaternion:
        h = 0.5 * angle
        comps = [0.0, 0.0, 0.0]
        comps[_AXES[axis]] = math.sin(h)
        return cls(math.cos(h), *comps)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def inverse(self) -> UnitQuaternion:
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def to_rotvec(self) -> np.ndarray:
        """Logarithm map; the returned angle is in ``[0, pi]``."""
        v = np.array([self.x, self.y, self.z])
        s = float(np.linalg.norm(v))
        if s == 0.0:
            return np.zeros(3)
        angle = 2.0 * math.atan2(s, self.w)
        return v * (angle / s)

    def __mul__(self, other: UnitQuaternion) -> UnitQuaternion:
        return quat_multiply(self, other)


@dataclass(frozen=True)
class EulerAngles:
    """Proper Euler angles: ``A(alpha) B(beta) A(gamma)`` for a convention ``ABA``."""

    alpha: float
    beta: float
    gamma: float
    convention: str = "zxz"

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}; expected one of {CONVENTIONS}")


@dataclass(frozen=True)
class SubgoalPlan:
    """Intermediate orientations reached after each elementary rotation, in execution order.

    ``steps`` holds the matching ``(axis, angle)`` world-frame rotations.
    """

    goals: tuple[UnitQuaternion, ...]
    steps: tuple[tuple[str, float], ...]
    convention: str = "zxz"
    angles: EulerAngles | None = field(default=None, compare=False)

    def __len__(self):
        return len(self.goals)

    def __iter__(self):
        return iter(self.goals)

    def __getitem__(self, i):
        return self.goals[i]


def quat_multiply(a: UnitQuaternion, b: UnitQuaternion) -> UnitQuaternion:
    """Hamilton product ``a * b``."""
    return UnitQuaternion(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )


def quat_to_matrix(q: UnitQuaternion) -> np.ndarray:
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m) -> UnitQuaternion:
    """Shepperd's method; picks the largest pivot for stability."""
    m = np.asarray(m, dtype=np.float64)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    pivots = (tr, m[0, 0], m[1, 1], m[2, 2])
    k = int(np.argmax(pivots))
    if k == 0:
        s = 2.0 * math.sqrt(1.0 + tr)
        q = (0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
    elif k == 1:
        s = 2.0 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = ((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
    elif k == 2:
        s = 2.0 * math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s)
    else:
        s = 2.0 * math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s)
    return UnitQuaternion(*q)


def geodesic_angle(a: UnitQuaternion, b: UnitQuaternion) -> float:
    """Rotation angle of ``a^-1 b`` in ``[0, pi]``.

    Equal to ``2 arccos(|<a, b>|)`` but evaluated through ``atan2`` so that
    angles far below 1e-8 are still resolved.
    """
    pa = a.as_array()
    pb = b.as_array()
    if float(pa @ pb) < 0.0:
        pb = -pb
    return 4.0 * math.atan2(float(np.linalg.norm(pa - pb)), float(np.linalg.norm(pa + pb)))


def _wrap(angle: float) -> float:
    """Map to ``(-pi, pi]``."""
    a = math.remainder(angle, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a + 0.0


def decompose(q: UnitQuaternion, convention: str = "zxz") -> EulerAngles:
    """Split ``q`` into ``Rz(alpha) R?(beta) Rz(gamma)`` with ``? = x`` or ``y``.

    Works directly on quaternion components, which keeps the sum and
    difference angles well conditioned near gimbal lock.  When ``sin(beta)``
    vanishes, ``beta`` snaps to 0 or pi and the free angle goes to ``alpha``.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    w, x, y, z = q.w, q.x, q.y, q.z
    if convention == "zxz":
        # x = sin(b/2) cos(d/2), y = sin(b/2) sin(d/2) with d = alpha - gamma
        px, py = x, y
    else:
        # y = sin(b/2) cos(d/2), x = -sin(b/2) sin(d/2)
        px, py = y, -x
    c = math.hypot(w, z)  # cos(beta/2) >= 0
    s = math.hypot(px, py)  # sin(beta/2) >= 0
    beta = 2.0 * math.atan2(s, c)
    if 2.0 * s * c < DEGENERATE_SIN_BETA:
        if beta < 0.5 * math.pi:
            return EulerAngles(_wrap(2.0 * math.atan2(z, w)), 0.0, 0.0, convention)
        return EulerAngles(_wrap(2.0 * math.atan2(py, px)), math.pi, 0.0, convention)
    total = 2.0 * math.atan2(z, w)
    diff = 2.0 * math.atan2(py, px)
    return EulerAngles(_wrap(0.5 * (total + diff)), beta, _wrap(0.5 * (total - diff)), convention)


def compose_elementary(e: EulerAngles) -> UnitQuaternion:
    first, middle = e.convention[0], e.convention[1]
    return quat_multiply(
        quat_multiply(UnitQuaternion.elementary(first, e.alpha), UnitQuaternion.elementary(middle, e.beta)),
        UnitQuaternion.elementary(first, e.gamma),
    )


def plan_subgoals(current: UnitQuaternion, target: UnitQuaternion, convention: str = "zxz") -> SubgoalPlan:
    """Break the move ``current -> target`` into at most three single-axis world-frame rotations.

    The relative rotation ``target * current^-1`` is decomposed as
    ``A(alpha) B(beta) A(gamma)``; executed about fixed world axes the
    rightmost factor acts first, so the steps are ``A(gamma)``, ``B(beta)``,
    ``A(alpha)``.  Near-zero steps are skipped and the last goal is pinned to
    ``target`` exactly.
    """
    relative = quat_multiply(target, current.inverse())
    e = decompose(relative, convention)
    first, middle = convention[0], convention[1]
    goals: list[UnitQuaternion] = []
    steps: list[tuple[str, float]] = []
    q = current
    for axis, angle in ((first, e.gamma), (middle, e.beta), (first, e.alpha)):
        if abs(angle) < MIN_PLAN_ANGLE:
            continue
        q = quat_multiply(UnitQuaternion.elementary(axis, angle), q)
        goals.append(q)
        steps.append((axis, angle))
    if goals:
        goals[-1] = target
    return SubgoalPlan(tuple(goals), tuple(steps), convention, e)


def random_quaternion(rng: np.random.Generator) -> UnitQuaternion:
    """Uniform (Haar) random rotation."""
    while True:
        v = rng.standard_normal(4)
        if np.linalg.norm(v) > 1e-6:
            return UnitQuaternion.from_array(v)
