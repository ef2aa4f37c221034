"""Block Lanczos solver for quadratic minimization with orthogonality constraints.

    min  tr(U^T H U) + 2 tr(U^T G)   subject to   U^T U = I
"""

from .baselines import BaselineConfig, dense_rtr_oracle, gpi_solve, rtr_full_solve
from .driver import (Checkpoint, QmpoProblem, SolveReport, SolverConfig, cheap_kkt, direct_kkt,
                     normalize, rel_obj_diff, solve, stopping)
from .errors import *  # noqa: F401,F403
from .lanczos import (BlockLanczosState, assemble_T, lanczos_extend, lanczos_init,
                      relation_residual)
from .linalg import SymmetricOperator, apply_sym, polar, sym_eig, thin_qr
from .mmio import read_matrix_market, write_matrix_market
from .problems import (GraphConfig, LabeledDataset, build_gcsed, build_olsr, gen_synthetic,
                       load_problem, read_dataset)
from .rtr import ReducedProblem, RtrConfig, global_necessary_check, rtr_solve
from .verification import (ConvergenceCertificate, balanced_svd_oracle, certify,
                           classify_spectrum, lemma_checks, subspace_distance,
                           trs_secular_oracle)

__version__ = "0.1.0"
