"""Georeferenced vehicle trajectories from hovering-UAV nadir video detections."""

__version__ = "0.1.0"
