"""Simulator of hover-event eavesdropping on touchscreen devices.

Modules: ``events`` (sessions and their file format), ``synth`` (calibrated
input generator), ``dispatch`` (window-manager input routing), ``attacker``
(overlay attack and capture records), ``learn`` (from-scratch models and
cross-validation), ``analysis`` (typing detection, timing, text) and ``cli``.
"""

__version__ = "0.1.0"
