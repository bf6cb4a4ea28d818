"""Shapley attribution for the parameters and filters of conjunctive queries."""

from .data import Database, Relation, RelationSchema, active_domain, load_database, make_relation, write_database
from .distributions import (
    FactorizedDistribution,
    JointTableDistribution,
    PerturbationDistribution,
    conditional_prob,
    load_distribution,
    mix_with_reference,
    pi_subset_prob,
    prob,
    sample_coalition,
    sample_perturbation,
)
from .errors import (
    BudgetExceeded,
    ComputationError,
    DataError,
    InputError,
    ParamShapError,
    PreconditionError,
    QueryParseError,
)
from .evaluation import evaluate, expected_count, materialize_filters, weighted_count
from .hypergraph import Hypergraph, JoinTree, gyo_reduce, hypergraph, is_p_acyclic
from .query import ParamQuery, ground, intersect_with_reference, parse_query
from .shap import (
    ShapResult,
    ShapTask,
    compute_shap,
    esim,
    hoeffding_sample_count,
    nu,
    nu_bar,
    shap_bruteforce,
    shap_bruteforce_all,
    shap_exact,
    shap_montecarlo,
    shapley_values,
)
from .similarity import (
    COUNT,
    INTERSECTION,
    JACCARD,
    NEG_DIFF,
    NEG_SYM_CDIFF,
    NEG_SYM_DIFF,
    SimilarityFn,
    parse_similarity,
    similarity,
)
from .whynot import (
    WhyNotInstance,
    build_parameterized,
    nu_qual,
    nu_size,
    q_restricted,
    whynot_shap_size,
    whynot_shapley_bruteforce,
    whynot_size_acyclic,
    whynot_size_closedform,
)

__version__ = "0.1.0"
