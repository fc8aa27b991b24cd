"""
Thin-chimney waveguide toolkit: Helmholtz scattering, invisibility design
and obstruction bounds for a sound-hard 2D strip.
"""

__version__ = '1.0.0'
