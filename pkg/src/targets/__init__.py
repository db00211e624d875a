"""
Target potentials, benchmark presets and observables.
"""
