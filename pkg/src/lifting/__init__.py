"""
Lifted state space: direction-augmented states and the skew-symmetric drift.
"""
