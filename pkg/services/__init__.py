"""
AngleSage - hyperspherical dispersion objectives, calibration metrics and test-time tuning simulator
"""

__version__ = "1.0.0"
