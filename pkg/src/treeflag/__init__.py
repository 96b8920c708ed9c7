"""Flag algebras of rooted binary trees and semidefinite density bounds."""

__version__ = "0.1.0"

from .trees import (
    EMPTY, LEAF, ParseError, Tree, TreeError, automorphism_count, caterpillar, density,
    double_caterpillar, enumerate_trees, even_tree, induced_subtree, parse_tree,
)
from .predicate import (
    PredicateError, TriplePredicate, predicate_to_tree, tree_to_predicate, validate_predicate,
)
from .flags import (
    QuantumFlag, TypeMismatchError, downward, enumerate_flags, expand_to_level, flag_density,
    flag_type, glue_product, q_sigma, sunflower_density, unlabeled_square_matrix,
)
from .hierarchy import HierarchyLevel, MomentBlock, block_signature, build_level
from .sdp import (
    SdpInstance, SdpSolution, assemble_inducibility_sdp, export_sdpa, inducibility, read_sdpa,
    solve,
)
from .certify import (
    RationalCertificate, kernel_check, load_certificate, round_solution, verify_certificate,
)
from .profiles import ProfileSpec, outer_approximation, slice_bound
