"""gclang: a toolchain for governed reactive components.

Parse `.gc` files, check well-formedness, run the operational semantics,
type-check components against session-style local types, compile to a
process calculus, and verify the compilation's behavioural guarantees on
bounded state spaces.
"""

__version__ = "0.1.0"
