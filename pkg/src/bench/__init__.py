"""
Experiment runner: JSON presets, worker pool fan-out and CSV output.
"""
