"""Network codes built from point-to-point symmetric-channel bricks."""

__version__ = "0.1.0"
