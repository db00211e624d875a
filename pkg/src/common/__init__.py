"""
Shared exceptions, logging setup and numerical helpers.
"""
