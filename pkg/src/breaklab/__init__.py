"""breaklab: a numerical laboratory for piecewise-affine potential flows.

Represents maps of the form x -> x + t * grad(phi) for continuous potentials
phi that are affine on each cell of a convex partition, and runs verifiable
checks on them: convexity certificates from gradient jumps, measure
preservation and expansion of the induced flow, subharmonicity pairings,
semidiscrete optimal transport (Laguerre diagrams), Helmholtz projection of
grid vector fields, and small-matrix determinant rigidity sweeps.
"""

__version__ = "0.1.0"
