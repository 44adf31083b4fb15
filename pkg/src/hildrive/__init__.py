"""Human-in-the-loop driving policy trainer.

A reward-free online learner (proxy-value + TD propagation + BC
regularization over dual intervention buffers) coupled to a deterministic
2D driving simulator with procedural maps, lidar sensing, and IDM traffic,
plus a browser teleoperation bridge for live human takeover.
"""

__version__ = "0.1.0"
