"""
cramerlab - a numerical laboratory for expected and distributional RL.

Implements tabular, linear and nonlinear update rules for expected values
and categorical return distributions, drives pairs of learners from one
shared sample stream, and checks whether their expectations stay equal.
"""

__version__ = "0.1.0"
__author__ = "cramerlab developers"
