"""
Tests for the blockbp package.
"""
