"""
Volume-preserving, direction-reversible integrators for the Hamiltonian part of the dynamics.
"""
