"""DSAC, SQIL and behavioural cloning on small continuous-control tasks, built on a
self-contained reverse-mode autodiff core."""

__version__ = "0.1.0"
