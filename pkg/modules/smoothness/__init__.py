from .propagation import (
    LabelVector,
    PartitionedTransition,
    closed_form_labels,
    energy,
    propagate_step,
    propagate_to_convergence,
    verify_harmonic,
)
from .regularizer import leave_one_out_label, ls_regularizer
