from tritraj.transcription.builder import Corridor, Transcription, build, initial_guess, warm_guess
from tritraj.transcription.collocation import CollocationScheme, collocation_scheme
from tritraj.transcription.refine import RefinementResult, audit_membership, solve_Q, solve_V
from tritraj.transcription.spline import Sample, SplineSegment, TrajectorySpline, sample

__all__ = [
    "CollocationScheme",
    "Corridor",
    "RefinementResult",
    "Sample",
    "SplineSegment",
    "TrajectorySpline",
    "Transcription",
    "audit_membership",
    "build",
    "collocation_scheme",
    "initial_guess",
    "sample",
    "solve_Q",
    "solve_V",
    "warm_guess",
]
