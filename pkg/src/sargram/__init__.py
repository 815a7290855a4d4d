"""sargram: stereo radargrammetry from slant-range SAR image pairs."""

__version__ = "0.1.0"
