"""
Tests for Markov Balance Imitation Learning
"""

__version__ = "1.0.0"
