"""crorient: numerical verification of determinant-line orientation transport
for Cauchy-Riemann operators on half-cylinders, spin lifting of rotation
loops, and twisted chain complexes."""

__version__ = "0.1.0"

SCHEMA_TAG = "cr-orient/1"
