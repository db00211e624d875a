"""
GMALA proposal kernels Q1, Q2, Q3 and the Picard fixed-point solver.
"""
