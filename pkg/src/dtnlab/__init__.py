"""Emergency-scenario DTN laboratory.

Simulates store-carry-forward message delivery from an accident site to
hospitals over map-constrained mobility, extracts per-node relay-quality
features from the resulting logs, trains gate classifiers, serves them over
HTTP, and runs comparative protocol sweeps.
"""

__version__ = "0.1.0"
