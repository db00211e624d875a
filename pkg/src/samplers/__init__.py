"""
MALA, GMALA and GHMALA transitions and the chain driver.
"""
