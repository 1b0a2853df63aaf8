"""
Quench UI Package
Rich console rendering of run results.
"""
