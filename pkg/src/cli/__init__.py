"""Command-line surface of the degenerate wave laboratory"""
