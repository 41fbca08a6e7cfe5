"""Sharp-interface limit toolkit for a Navier-Stokes/Allen-Cahn system.

Optimal profiles, matched-asymptotics ODE solves, spectral estimates,
epsilon-dependent curvilinear coordinates, a parabolic surface PDE, a 2D
finite-volume solver and convergence studies against circular references.
"""
__version__ = "0.1.0"
