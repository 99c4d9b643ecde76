from dataclasses import replace

from coop_forecaster.Scenario.types import AgentTrack, ObservedState
from coop_forecaster.Utils.errors import ResyncError


def drop_latest(track: AgentTrack, drop: int) -> AgentTrack | None:
    """Remove the last `drop` frames without refilling; None when nothing observed remains."""
    if drop == 0:
        return track
    steps = len(track.frames)
    frames = track.frames[:steps - drop] + (None,) * drop
    if not any(state is not None for state in frames):
        return None
    return replace(track, frames=frames)


def resync_track(track: AgentTrack, drop: int) -> AgentTrack:
    """
    Emulate a link delayed by `drop` frames, then re-align it to the current time.

    The last `drop` frames are removed. Those the view had actually observed are
    refilled by linear extrapolation of position from the last two observed
    states that remain; heading, bbox and speed are carried forward from the
    latest of them. Unobserved frames stay empty.
    """
    if drop not in (0, 1, 2):
        raise ResyncError(f"drop must be 0, 1 or 2 frames, got {drop}")
    if drop == 0:
        return track
    steps = len(track.frames)
    kept = track.frames[:steps - drop]
    if all(state is None for state in track.frames[steps - drop:]):
        return track
    observed = [t for t, state in enumerate(kept) if state is not None]
    if len(observed) < 2:
        raise ResyncError(f"track {track.track_id}: {len(observed)} observed frames remain after dropping {drop}")

    t0, t1 = observed[-2], observed[-1]
    s0, s1 = kept[t0], kept[t1]
    vx = (s1.position[0] - s0.position[0]) / (t1 - t0)
    vy = (s1.position[1] - s0.position[1]) / (t1 - t0)
    refilled: list[ObservedState | None] = []
    for t in range(steps - drop, steps):
        if track.frames[t] is None:
            refilled.append(None)
            continue
        lag = t - t1
        refilled.append(replace(s1, position=(s1.position[0] + lag * vx, s1.position[1] + lag * vy)))
    return replace(track, frames=tuple(kept) + tuple(refilled))
