"""Pointwise costs, indifference hyperplanes, and pairwise action geometry.

The encoder pays ``||m - u - b||^2`` for source value ``m``, decoder action
``u`` and bias ``b``; the decoder pays ``||m - u||^2``.  Two decoder actions
split the source space along a hyperplane of encoder indifference, and any
two actions that can coexist at equilibrium must keep a minimum separation
relative to the bias direction.  This module provides those primitives as
pure functions; bins are represented implicitly through the argmin
assignment rule rather than explicit polytopes.

Sign convention: ``h_value(m, u_first, u_second, b) > 0`` exactly when the
encoder strictly prefers ``u_first``, so the first action's bin is the
half-space ``{h >= 0}``.  This is the convention forced by the cost
difference identity ``cost(m, u_second) - cost(m, u_first) = 2 h``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError

__all__ = [
    "Hyperplane",
    "as_point",
    "encoder_cost",
    "decoder_cost",
    "h_value",
    "indifference_hyperplane",
    "geo_slack",
    "lambda_bar",
    "g_slack_transformed",
    "assign_action",
    "assign_actions_batch",
]


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float vector, optionally of length ``dim``."""
    p = np.asarray(x, dtype=float)
    if p.ndim == 0:
        p = p.reshape(1)
    if p.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-D vector, got shape {p.shape}")
    if dim is not None and p.shape[0] != dim:
        raise DimensionMismatchError(f"expected a vector of length {dim}, got {p.shape[0]}")
    if not np.all(np.isfinite(p)):
        raise ValueError("vector entries must be finite")
    return p


@dataclass(frozen=True)
class Hyperplane:
    """Affine hyperplane ``{m : normal . (m - anchor) = 0}``.

    ``value`` is positive on the side the normal points into; membership is
    exact in this stored representation.
    """

    normal: np.ndarray
    anchor: np.ndarray

    def __post_init__(self):
        normal = as_point(self.normal)
        anchor = as_point(self.anchor, dim=normal.shape[0])
        if not np.any(normal):
            raise ValueError("hyperplane normal must be nonzero")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "anchor", anchor)

    def value(self, m) -> float | np.ndarray:
        """Signed value ``normal . (m - anchor)``; accepts a point or an (N, n) batch."""
        m = np.asarray(m, dtype=float)
        return (m - self.anchor) @ self.normal


def encoder_cost(m, u, b) -> float:
    """Encoder cost ``sum_i (m_i - u_i - b_i)^2``."""
    m = as_point(m)
    u = as_point(u, dim=m.shape[0])
    b = as_point(b, dim=m.shape[0])
    d = m - u - b
    return float(d @ d)


def decoder_cost(m, u) -> float:
    """Decoder cost ``||m - u||^2``."""
    m = as_point(m)
    u = as_point(u, dim=m.shape[0])
    d = m - u
    return float(d @ d)


def h_value(m, u_first, u_second, b) -> float:
    """Signed indifference value between two decoder actions.

    Returns ``(m - ((u_first + u_second)/2 + b)) . (u_first - u_second)``:
    positive iff the encoder strictly prefers ``u_first`` over ``u_second``,
    zero exactly on the indifference hyperplane.
    """
    m = as_point(m)
    u1 = as_point(u_first, dim=m.shape[0])
    u2 = as_point(u_second, dim=m.shape[0])
    b = as_point(b, dim=m.shape[0])
    if np.array_equal(u1, u2):
        raise ValueError("indifference is undefined for identical actions")
    anchor = 0.5 * (u1 + u2) + b
    return float((m - anchor) @ (u1 - u2))


def indifference_hyperplane(u_first, u_second, b) -> Hyperplane:
    """The hyperplane where the encoder is indifferent between two actions.

    ``plane.value(m)`` equals ``h_value(m, u_first, u_second, b)``; the bin of
    ``u_first`` lies in ``{value >= 0}``.
    """
    u1 = as_point(u_first)
    u2 = as_point(u_second, dim=u1.shape[0])
    b = as_point(b, dim=u1.shape[0])
    if np.array_equal(u1, u2):
        raise ValueError("indifference is undefined for identical actions")
    return Hyperplane(normal=u1 - u2, anchor=0.5 * (u1 + u2) + b)


def geo_slack(u_a, u_b, b) -> float:
    """Slack of the pairwise separation condition for two decoder actions.

    Returns ``||u_b - u_a||^2 - 2 |(u_b - u_a) . b|``.  Nonnegative exactly
    when the pair can coexist at equilibrium; a negative value measures the
    margin of violation.  Symmetric in the two actions and invariant under a
    common translation.
    """
    u_a = as_point(u_a)
    u_b = as_point(u_b, dim=u_a.shape[0])
    b = as_point(b, dim=u_a.shape[0])
    d = u_b - u_a
    return float(d @ d - 2.0 * abs(d @ b))


def lambda_bar(u_a, u_b, b) -> float:
    """Position of the indifference plane along the segment from u_a to u_b.

    Returns ``(1 + 2 (u_b - u_a) . b / ||u_b - u_a||^2) / 2``, the affine
    coordinate at which the indifference hyperplane crosses the connecting
    line (0 at ``u_a``, 1 at ``u_b``).  Lies in [0, 1] iff ``geo_slack >= 0``.
    """
    u_a = as_point(u_a)
    u_b = as_point(u_b, dim=u_a.shape[0])
    b = as_point(b, dim=u_a.shape[0])
    d = u_b - u_a
    nsq = float(d @ d)
    if nsq == 0.0:
        raise ValueError("lambda_bar is undefined for coincident actions")
    return 0.5 * (1.0 + 2.0 * float(d @ b) / nsq)


def g_slack_transformed(y_a, y_b, b_tilde: float) -> float:
    """Separation slack in bias-concentrated 2-D coordinates.

    In coordinates where the whole bias sits on the second axis with
    magnitude ``b_tilde``, the pairwise condition for actions ``y_a, y_b``
    reads ``(dy1)^2 + (dy2)^2 - 2 b_tilde |dy2| >= 0``; this returns the
    left-hand side.
    """
    y_a = as_point(y_a, dim=2)
    y_b = as_point(y_b, dim=2)
    b_tilde = float(b_tilde)
    if b_tilde <= 0.0:
        raise ValueError("b_tilde must be positive")
    d = y_b - y_a
    return float(d[0] ** 2 + d[1] ** 2 - 2.0 * b_tilde * abs(d[1]))


def assign_action(m, actions, b) -> int:
    """Index of the encoder's preferred action for observation ``m``.

    Returns the smallest 0-based index attaining ``min_i encoder_cost(m, u_i, b)``;
    equivalently ``m`` lies in the intersection of the preferred half-spaces
    of that action.  Ties on indifference planes break to the lowest index.
    """
    m = as_point(m)
    return int(assign_actions_batch(m.reshape(1, -1), actions, b)[0])


def assign_actions_batch(points, actions, b) -> np.ndarray:
    """Vectorized ``assign_action`` for an (N, n) batch of points."""
    acts = np.asarray(getattr(actions, "actions", actions), dtype=float)
    if acts.ndim == 1:
        acts = acts.reshape(-1, 1)
    if acts.shape[0] == 0:
        raise ValueError("action set must be nonempty")
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    b = as_point(b, dim=acts.shape[1])
    if pts.shape[1] != acts.shape[1]:
        raise DimensionMismatchError(
            f"points have dimension {pts.shape[1]}, actions {acts.shape[1]}"
        )
    target = pts - b
    # ||t - u||^2 = ||t||^2 - 2 t.u + ||u||^2; the ||t||^2 term is common to
    # all actions and drops out of the argmin.
    scores = -2.0 * target @ acts.T + np.sum(acts * acts, axis=1)
    return np.argmin(scores, axis=1)
