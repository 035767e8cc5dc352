"""PPO-driven joint deployment and hybrid beamforming for STAR-RIS assisted MU-MISO downlink."""

__version__ = "0.1.0"
