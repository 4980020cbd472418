"""
Package initializer for src: connectivity-based DOP analysis of cooperative localization.
"""
__version__ = "0.3.0"
