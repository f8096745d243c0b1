"""Strategy-proof reverse auctions for cloud service composition.

Winner determination by dynamic programming over accumulated quality, VCG
(Clarke pivot) payments, first-price and posted-price baselines, a deviation
harness for checking truthfulness, and an append-only outcome ledger.
"""
from .market import (
    FIRST_PRICE,
    VCG,
    Allocation,
    AuctionOutcome,
    Mechanism,
    Offer,
    PaymentSchedule,
    Scenario,
    ValidationError,
    load_scenario,
    parse_scenario,
    posted_price,
    scenario_digest,
    serialize_scenario,
    validate_scenario,
)
from .pricing import (
    MonopolyProvider,
    check_budget,
    first_price_payments,
    posted_price_payments,
    provider_utilities,
    vcg_payments,
)
from .solver import restrict, solve_bruteforce, solve_dp
from .strategy import (
    DEFAULT_GRID,
    GenParams,
    compare_mechanisms,
    deviation_sweep,
    generate_scenario,
    run_auction,
    update_reputation,
    verify_strategyproof,
)

__version__ = "0.1.0"
