"""Static Cosserat-rod model of a two-tube tendon-actuated concentric robot."""

__version__ = "0.1.0"
