"""
Rejection rates, replicate variances, autocorrelation times and scaling fits.
"""
