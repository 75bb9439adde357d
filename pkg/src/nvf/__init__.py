"""Neural voting fields for camera-space 3D hand pose estimation."""
__version__ = "0.1.0"
