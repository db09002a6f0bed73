"""Numerical laboratory for one-dimensional diffusion homogenization with a
large random potential: random fields and correctors, quenched path sampling,
finite-volume solvers, the limiting Gaussian-potential model and the
statistics used to compare them."""

__version__ = "0.1.0"
