"""Neck muscle strain estimation from head-tracker orientation streams.

Subpackages: dsp (filtering, envelopes, spectra), ingest (stream parsing and
synchronization), synth (ground-truth session generator), models (regression
families), posture (episode detection), cli (command-line pipeline).
"""
from ._backend import BACKEND as kernel_backend

__version__ = "0.1.0"
__all__ = ["kernel_backend", "__version__"]
