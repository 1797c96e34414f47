"""
Test suite for cramerlab.
"""
