"""Cold atoms around a levitated dielectric nanosphere.

Near-field optical and Casimir-Polder potentials, Numerov bound states,
classical and partial-wave scattering, and sympathetic-cooling estimates.
"""

__version__ = "0.1.0"
