"""Supersingular K3 surfaces: RDP configurations and extremal (quasi-)elliptic fibrations.

Modules:
    exactlin: exact integer linear algebra (Smith, Hermite, Howell forms).
    adelattice: ADE types, root lattices and glue data.
    discform: finite quadratic modules, subgroups and overlattices.
    symmetry: symmetry groups of glue groups and orbit enumeration.
    classify_rdp: candidates, pruning and the RDP classification.
    classify_elliptic: extremal elliptic and quasi-elliptic fibrations.
    tables: published tables as fixtures and a diff engine.
    cli: command line front end.
"""

__version__ = "0.1.0"
