"""Upper-limb strength-training motion toolkit.

Capture frames over HTTP, window them into labeled sequences, filter
channels by Pearson correlation against accelerometer_x, and train a
stacked LSTM classifier for the nine supported motions.
"""

__version__ = "0.1.0"

from armsense.frames import HandSide, MotionType, SensorFrame  # noqa: F401
