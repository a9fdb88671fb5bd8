"""Python bindings for the mel-spectrogram predictive-coding pipeline."""

try:
    from ._melpc import *  # noqa: F401,F403  (installed package layout)
except ImportError:
    from _melpc import *  # noqa: F401,F403  (build-tree layout)
