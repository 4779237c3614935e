"""Lattice operations for stable matchings in substitutable two-sided markets.

The join and meet of two stable matchings are computed by pooling their
assignments into a quasi-stable candidate and re-equilibrating it with an
isotone operator whose fixed points are exactly the stable matchings.  An
enumeration oracle provides independent ground truth at desk scale.
"""

from .errors import (
    BudgetExceeded,
    CapExceeded,
    GenerationFailed,
    MatchLatticeError,
    NonConvergence,
    NotFirmQuasiStable,
    NotStable,
    NotWorkerQuasiStable,
    ParseError,
    PreimageNotStable,
    ReferentialIntegrity,
    SchemaError,
    UnknownAgent,
)
from .market import (
    LinearPref,
    Market,
    QuotaLinearChoice,
    SetListChoice,
    validate_consistent,
    validate_market,
    validate_path_independent,
    validate_substitutable,
)
from .matching import (
    BlockingPair,
    F_set_of_worker,
    Matching,
    W_set_of_firm,
    blair_geq_firms,
    blair_geq_workers,
    blocked_by_firm,
    blocked_by_worker,
    blocking_pairs,
    is_firm_quasi_stable,
    is_individually_rational,
    is_stable,
    is_worker_quasi_stable,
    unanimous_geq_workers,
    worker_order_geq,
)
from .oracle import (
    EnumerationBudget,
    LatticeReport,
    RandomMarketSpec,
    brute_join,
    brute_meet,
    enumerate_matchings,
    enumerate_quasi_stable,
    enumerate_stable,
    random_market,
    verify_lattice,
)
from .replica import (
    QExtensionChoice,
    RelatedMarket,
    ReplicaMap,
    blair_geq_firms_q,
    build_related_market,
    lifted_join_firms,
    lifted_join_workers,
    lifted_meet_firms,
    lifted_meet_workers,
    phi,
    phi_inverse_stable,
    phi_preimage,
    q_extended_choose,
)
from .tarski import (
    B_set_of_firm,
    B_set_of_worker,
    ExtremalResult,
    OperatorTrace,
    extremal_stable,
    gamma_join,
    iterate_to_fixed_point,
    lambda_join,
    stable_join_firms,
    stable_join_workers,
    stable_meet_firms,
    stable_meet_workers,
    tarski_firm_step,
    tarski_worker_step,
)

__version__ = "0.1.0"
