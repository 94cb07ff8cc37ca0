"""
MAP Burstiness Analyzer
Overdispersion, hazard-rate, SCV and stochastic-order properties of Markovian arrival processes
"""

__version__ = "0.1.0"
