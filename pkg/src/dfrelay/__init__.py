"""Decode-and-forward relaying over Rayleigh fading: near-ML decoding,
labelling construction, pairwise error bounds and a Monte Carlo BER harness."""
from .channel import ChannelParams, FadeDraw
from .constellation import SignalSet, make_mpsk, min_sq_dist, sq_dist
from .decoder import IdealLinkDetector, NearMLDetector, RelayDetector, ideal_ml, near_ml, relay_ml
from .labeling import Labeling, LabelingProfile, Scheme, identity_profile
from .labeling_search import GreedyLabeler, exhaustive_best
from .metrics import MetricContext, labeling_gain_db, labeling_min_metric
from .pep import BoundContext, union_bound
from .sim import BerCurve, RelayMode, SimConfig, run_point, run_sweep

__version__ = "0.1.0"

__all__ = [
    "BerCurve",
    "BoundContext",
    "ChannelParams",
    "FadeDraw",
    "GreedyLabeler",
    "IdealLinkDetector",
    "Labeling",
    "LabelingProfile",
    "MetricContext",
    "NearMLDetector",
    "RelayDetector",
    "RelayMode",
    "Scheme",
    "SignalSet",
    "SimConfig",
    "exhaustive_best",
    "identity_profile",
    "ideal_ml",
    "labeling_gain_db",
    "labeling_min_metric",
    "make_mpsk",
    "min_sq_dist",
    "near_ml",
    "relay_ml",
    "run_point",
    "run_sweep",
    "sq_dist",
    "union_bound",
]
