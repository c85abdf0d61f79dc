"""Trajectory errors against ground truth, feature age and the outlier CDF."""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..base.misc import EmptyOverlapError
from ..base.track import TerminationReason, TrackRecord
from ..math import wrap_angle
from ..mpi import MPI_RAISE_EXCEPTION


@dataclass
class FeatureEvaluation:
    """Errors of one track against its ground truth.

    Attributes
    ----------
    feature_id : int
        Track identifier
    times_s : np.ndarray
        Track state times inside the ground-truth interval
    position_errors : np.ndarray
        Euclidean position error at `times_s`, pixels
    theta_errors : np.ndarray
        Absolute wrapped orientation error at `times_s`, radians
    start_s : float
        Time of the first track state
    track_age_s : float
        Time between the first and the last track state
    terminated_early : bool
        Whether the track ended for a reason other than the stream end
    threshold_px : float
        Outlier threshold the summary fields refer to
    template_sharpness : float
        Share of the final template above a low fraction of its peak, `nan`
        when unknown
    """

    feature_id: int
    times_s: np.ndarray
    position_errors: np.ndarray
    theta_errors: np.ndarray
    start_s: float
    track_age_s: float
    terminated_early: bool
    threshold_px: float = 5.0
    template_sharpness: float = float("nan")

    @property
    def mean_error_px(self) -> float:
        return float(self.position_errors.mean())

    @property
    def max_error_px(self) -> float:
        return float(self.position_errors.max())

    @property
    def mean_theta_error(self) -> float:
        return float(self.theta_errors.mean())

    @property
    def max_theta_error(self) -> float:
        return float(self.theta_errors.max())

    @property
    def outlier(self) -> bool:
        return self.max_error_px > self.threshold_px

    def loss_age(self, threshold_px: Optional[float] = None) -> Optional[float]:
        """Age at which the feature is lost: its first error above the
        threshold, otherwise the end of an early-terminated track. `None`
        for a feature that survives."""
        threshold_px = self.threshold_px if threshold_px is None else threshold_px
        above = np.flatnonzero(self.position_errors > threshold_px)
        if above.size > 0:
            return float(self.times_s[above[0]] - self.start_s)
        if self.terminated_early:
            return self.track_age_s
        return None

    @property
    def age_s(self) -> float:
        """Time the feature stays below the outlier threshold"""
        lost = self.loss_age()
        return self.track_age_s if lost is None else lost


def trajectory_error(
    track: TrackRecord, gt: TrackRecord, threshold_px: float = 5.0
) -> FeatureEvaluation:
    """Compares every track state inside the ground-truth time interval with
    the linearly interpolated ground truth.

    Raises
    ------
    EmptyOverlapError
        If no track state falls inside the ground-truth interval
    """
    MPI_RAISE_EXCEPTION(
        condition=(threshold_px <= 0),
        exception=ValueError,
        message=f"The outlier threshold must be positive, got {threshold_px}",
    )
    t_track = np.asarray(track.times_us, dtype=np.int64)
    t_gt = np.asarray(gt.times_us, dtype=np.int64)
    if t_track.size == 0 or t_gt.size == 0:
        raise EmptyOverlapError(f"Feature {track.feature_id}: empty track or ground truth")

    inside = (t_track >= t_gt[0]) & (t_track <= t_gt[-1])
    if not np.any(inside):
        raise EmptyOverlapError(
            f"Feature {track.feature_id}: track and ground truth do not overlap in time"
        )

    # relative times keep the interpolation independent of the time origin
    origin = t_gt[0]
    times = (t_track[inside] - origin) * 1.0e-6
    knots = (t_gt - origin) * 1.0e-6
    states = track.state_array()[inside]
    truth = gt.state_array()

    gx = np.interp(times, knots, truth[:, 0])
    gy = np.interp(times, knots, truth[:, 1])
    gtheta = np.interp(times, knots, np.unwrap(truth[:, 2]))

    position_errors = np.hypot(states[:, 0] - gx, states[:, 1] - gy)
    theta_errors = np.abs(wrap_angle(states[:, 2] - gtheta))
    theta_errors = np.atleast_1d(theta_errors)

    reason = track.reason
    terminated_early = reason is not None and reason != TerminationReason.END_OF_STREAM
    return FeatureEvaluation(
        feature_id=track.feature_id,
        times_s=times + (origin - t_track[0]) * 1.0e-6,
        position_errors=position_errors,
        theta_errors=theta_errors,
        start_s=0.0,
        track_age_s=track.age_s,
        terminated_early=bool(terminated_early),
        threshold_px=threshold_px,
    )


def feature_age_cdf(
    evaluations: Sequence[FeatureEvaluation],
    threshold_px: float = 5.0,
    horizon_s: float = 1.0,
    samples: int = 101,
) -> Tuple[np.ndarray, np.ndarray]:
    """Fraction of features lost by each age on a uniform grid over
    `[0, horizon_s]`.

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        The grid and the non-decreasing CDF values in `[0, 1]`
    """
    MPI_RAISE_EXCEPTION(
        condition=(len(evaluations) == 0),
        exception=ValueError,
        message="No feature to build the outlier CDF from",
    )
    MPI_RAISE_EXCEPTION(
        condition=(threshold_px <= 0 or horizon_s <= 0 or samples < 2),
        exception=ValueError,
        message="threshold_px and horizon_s must be positive and samples >= 2",
    )
    grid = np.linspace(0.0, horizon_s, samples)
    losses = [e.loss_age(threshold_px) for e in evaluations]
    lost_at = np.array([np.inf if age is None else age for age in losses])
    cdf = (lost_at[None, :] <= grid[:, None]).mean(axis=1)
    return grid, cdf


@dataclass
class EvalReport:
    """Per-feature evaluations of a run and their outlier CDF

    Attributes
    ----------
    evaluations : List[FeatureEvaluation]
        One entry per matched track
    threshold_px : float
        Outlier threshold
    horizon_s : float
        Horizon of the CDF
    grid : np.ndarray
        CDF ages
    cdf : np.ndarray
        Fraction of features lost by each age
    missing_ids : List[int]
        Ids present on only one side, or without temporal overlap
    """

    evaluations: List[FeatureEvaluation]
    threshold_px: float
    horizon_s: float
    grid: np.ndarray
    cdf: np.ndarray
    missing_ids: List[int] = field(default_factory=list)

    @property
    def mean_error_px(self) -> float:
        return float(np.mean([e.mean_error_px for e in self.evaluations]))

    @property
    def outlier_fraction(self) -> float:
        return float(np.mean([e.outlier for e in self.evaluations]))

    @property
    def mean_sharpness(self) -> float:
        """Mean template sharpness over the features where it is known"""
        known = [e.template_sharpness for e in self.evaluations]
        known = [s for s in known if not np.isnan(s)]
        return float(np.mean(known)) if known else float("nan")

    @property
    def survival_fraction(self) -> float:
        """Features never lost within the horizon"""
        return float(1.0 - self.cdf[-1])


def evaluate_tracks(
    tracks: Sequence[TrackRecord],
    ground_truth: Sequence[TrackRecord],
    threshold_px: float = 5.0,
    horizon_s: Optional[float] = None,
    samples: int = 101,
    sharpness: Optional[Mapping[int, float]] = None,
) -> EvalReport:
    """Matches tracks to ground truth by feature id and evaluates them.

    `horizon_s` defaults to the longest ground-truth duration. `sharpness`
    maps feature ids to the sharpness of their final template.
    """
    sharpness = {} if sharpness is None else sharpness
    truth: Dict[int, TrackRecord] = {g.feature_id: g for g in ground_truth}
    by_id: Dict[int, TrackRecord] = {t.feature_id: t for t in tracks}
    missing = sorted(set(truth) ^ set(by_id))

    evaluations = []
    for feature_id in sorted(set(truth) & set(by_id)):
        try:
            evaluation = trajectory_error(
                by_id[feature_id], truth[feature_id], threshold_px
            )
        except EmptyOverlapError:
            missing.append(feature_id)
            continue
        evaluation.template_sharpness = sharpness.get(feature_id, float("nan"))
        evaluations.append(evaluation)

    if horizon_s is None:
        horizon_s = max((g.age_s for g in ground_truth), default=0.0)
    if horizon_s <= 0:
        horizon_s = 1.0
    grid, cdf = feature_age_cdf(evaluations, threshold_px, horizon_s, samples)
    return EvalReport(
        evaluations=evaluations,
        threshold_px=threshold_px,
        horizon_s=horizon_s,
        grid=grid,
        cdf=cdf,
        missing_ids=sorted(missing),
    )
