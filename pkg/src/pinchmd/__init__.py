"""pinchmd: pinch-glove driven interactive molecular dynamics.

Pinch localization and calibration, a debounced two-circuit gesture engine,
two-hand scale/rotate of the view transform, a real-time bead-spring MD
server speaking JSON over WebSocket, and a knot-tying task harness with an
algorithmic knot classifier.
"""

__version__ = "0.1.0"
