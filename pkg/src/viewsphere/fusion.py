"""Majority-vote fusion of per-view predictions into one label and pose offset."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

from .predict import ViewPrediction
from .viewrig import Viewpoint, viewpoint_from_index

YAW_STEP = 30
PITCH_MIN_OFFSET = -120
PITCH_MAX_OFFSET = 120


@dataclass(frozen=True, order=True)
class PoseOffset:
    """Discretized rotation from the canonical orientation, degrees.

    ``d_theta`` is cyclic yaw in {0, 30, ..., 330}; ``d_phi`` is signed pitch
    in {-120, ..., +120} (the rings span only 30..150 degrees, so pitch is not
    cyclic).
    """

    d_theta: int
    d_phi: int

    def __post_init__(self):
        if self.d_theta % YAW_STEP or not 0 <= self.d_theta < 360:
            raise ValueError(f"d_theta must be a multiple of 30 in [0, 330], got {self.d_theta}")
        if self.d_phi % YAW_STEP or not PITCH_MIN_OFFSET <= self.d_phi <= PITCH_MAX_OFFSET:
            raise ValueError(
                f"d_phi must be a multiple of 30 in [{PITCH_MIN_OFFSET}, {PITCH_MAX_OFFSET}], "
                f"got {self.d_phi}"
            )


def pose_offset(capture: Viewpoint, predicted_index: int) -> PoseOffset:
    """Rotation implied by seeing viewpoint ``predicted_index`` from ``capture``."""
    predicted = viewpoint_from_index(predicted_index, radius=capture.radius)
    return PoseOffset(
        d_theta=(capture.theta_deg - predicted.theta_deg) % 360,
        d_phi=capture.phi_deg - predicted.phi_deg,
    )


@dataclass
class FusedPrediction:
    """Aggregate of per-view votes: winning category and pose plus the tallies."""

    category: str
    pose: PoseOffset
    class_votes: dict[str, float]
    pose_votes: dict[PoseOffset, float]
    views_used: int


def _winner(tallies: dict, tie_scores: dict, smallest_key) -> object:
    """Option with the maximal tally; ties prefer higher summed scores, then smallest key."""
    best_tally = max(tallies.values())
    tied = [option for option, tally in tallies.items() if tally == best_tally]
    if len(tied) == 1:
        return tied[0]
    best_score = max(tie_scores[option] for option in tied)
    tied = [option for option in tied if tie_scores[option] == best_score]
    return min(tied, key=smallest_key)


def fuse(
    views: Sequence[tuple[Viewpoint, ViewPrediction]], mode: str = "argmax"
) -> FusedPrediction:
    """Combine per-view predictions by majority vote.

    In ``argmax`` mode each view casts one vote for its best category and one
    for the pose offset implied by its best viewpoint; plurality wins. Ties
    are broken by the larger summed scores among the tied options, then by
    the lexicographically smallest category / smallest (d_theta, d_phi). In
    ``score_sum`` mode the score mass itself is accumulated instead of votes.

    Raises:
        ValueError: empty input or unknown mode.
    """
    if not views:
        raise ValueError("cannot fuse an empty list of views")
    if mode not in ("argmax", "score_sum"):
        raise ValueError(f"unknown fusion mode {mode!r}")

    if mode == "argmax":
        class_votes: Counter[str] = Counter()
        pose_votes: Counter[PoseOffset] = Counter()
        class_tie: defaultdict[str, float] = defaultdict(float)
        pose_tie: defaultdict[PoseOffset, float] = defaultdict(float)
        for capture, prediction in views:
            category = prediction.top_class()
            view_index = prediction.top_viewpoint()
            offset = pose_offset(capture, view_index)
            class_votes[category] += 1
            pose_votes[offset] += 1
            class_tie[category] += prediction.class_scores[category]
            pose_tie[offset] += float(prediction.viewpoint_scores[view_index])
    else:
        class_votes = defaultdict(float)
        pose_votes = defaultdict(float)
        for capture, prediction in views:
            for category, score in prediction.class_scores.items():
                class_votes[category] += score
            for view_index, score in enumerate(prediction.viewpoint_scores):
                pose_votes[pose_offset(capture, view_index)] += float(score)
        class_tie = class_votes
        pose_tie = pose_votes

    category = _winner(dict(class_votes), class_tie, smallest_key=lambda name: name)
    pose = _winner(dict(pose_votes), pose_tie, smallest_key=lambda off: (off.d_theta, off.d_phi))
    return FusedPrediction(
        category=category,
        pose=pose,
        class_votes=dict(class_votes),
        pose_votes=dict(pose_votes),
        views_used=len(views),
    )
