"""Lattice points on spheres and restriction of toral Laplace eigenfunctions
to curved hypersurfaces: enumeration, cap statistics, surface-measure Fourier
transforms, Gram-matrix restriction constants and exponential sums."""

__version__ = "0.1.0"
