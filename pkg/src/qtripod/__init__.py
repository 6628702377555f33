"""Exact and numerical dynamics of a tripod atom in a q-deformed binomial field."""

from qtripod.qalgebra import (
    Convention,
    DeformationSpec,
    FieldSpec,
    binomial_pmf,
    binomial_state,
    q_binomial_coeff,
    q_factorial,
    q_number,
    q_one_minus_pow,
)
from qtripod.dynamics import AtomInit, ModelParams, evolve_closed_form
from qtripod.observables import (
    JointState,
    fidelity_exact,
    fidelity_paper_literal,
    linear_entropy,
    purity,
    reduce_atom,
    reduce_field,
)

__version__ = "0.1.0"
