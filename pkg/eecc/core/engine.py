import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

from ..base.misc import InitStarvedError
from ..base.track import TerminationReason, TrackRecord
from ..io.config import Config
from ..io.streams import SeedSpec, StreamHeader, parse_event_stream
from ..mpi import MPI_UTILS

from .tracker import init_feature

logger = logging.getLogger(__name__)


@dataclass
class SeedResult:
    """Track of one seed and the counters of its tracker

    Attributes
    ----------
    index : int
        Position of the seed in the seed list, used as feature id
    seed : SeedSpec
        The seed
    record : TrackRecord
        Tracked states; empty when initialisation failed
    initialized : bool
        Whether the tracker got past initialisation
    accepted : int
        Gated events that produced a state
    rejected : int
        Events outside the gate
    iterations : int
        Solver steps
    clamped_steps : int
        Steps whose update was clamped
    template_sharpness : float
        Share of the final template above 5% of its peak, `nan` without a
        template
    """

    index: int
    seed: SeedSpec
    record: TrackRecord
    initialized: bool
    accepted: int = 0
    rejected: int = 0
    iterations: int = 0
    clamped_steps: int = 0
    template_sharpness: float = float("nan")


def track_seed(
    events_source,
    seed: SeedSpec,
    index: int,
    config: Optional[Config] = None,
) -> SeedResult:
    """Tracks one seed over its own pass of the event stream.

    `events_source` is a path or a re-iterable sequence of lines, so that
    every seed can open an independent reader.
    """
    config = Config() if config is None else config
    header = StreamHeader(width=config.width, height=config.height)
    events = iter(
        parse_event_stream(events_source, header=header, strict=config.strict_timestamps)
    )
    try:
        try:
            tracker = init_feature(
                seed.state(), events, config=config, feature_id=index, start_us=seed.t_us
            )
        except InitStarvedError as err:
            logger.warning("%s", err)
            record = TrackRecord(index, reason=TerminationReason.INIT_STARVED)
            return SeedResult(index=index, seed=seed, record=record, initialized=False)
        except ValueError as err:
            logger.warning("seed %d: %s", index, err)
            record = TrackRecord(index, reason=TerminationReason.OUT_OF_BOUNDS)
            return SeedResult(index=index, seed=seed, record=record, initialized=False)

        record = tracker.run(events)
        return SeedResult(
            index=index,
            seed=seed,
            record=record,
            initialized=True,
            accepted=tracker.accepted,
            rejected=tracker.rejected,
            iterations=tracker.iterations,
            clamped_steps=tracker.clamped_steps,
            template_sharpness=tracker.template.sharpness(),
        )
    finally:
        events.close()


def track_seeds(
    events_source,
    seeds: Sequence[SeedSpec],
    config: Optional[Config] = None,
    nthreads: Optional[int] = None,
) -> List[SeedResult]:
    """Tracks every seed.

    Seeds are split round-robin over the MPI ranks; each rank runs its share
    on a pool of `nthreads` threads (`EECC_THREADS` when `None`). The results
    of all ranks are gathered on every rank.

    Returns
    -------
    List[SeedResult]
        One result per seed, in seed order
    """
    config = Config() if config is None else config
    local = list(MPI_UTILS.local_share(len(seeds)))
    workers = MPI_UTILS.nthreads_per_process if nthreads is None else max(1, nthreads)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(
            pool.map(
                lambda idx: track_seed(events_source, seeds[idx], idx, config), local
            )
        )

    if MPI_UTILS.size > 1:
        gathered = MPI_UTILS.comm.allgather(results)
        results = [result for part in gathered for result in part]
    return sorted(results, key=lambda result: result.index)
