"""Finite-length polar coding toolkit.

Construction, SC and belief-propagation decoding, stopping-set and girth
analysis of the polar factor graph, an irregular LDPC companion code, the
polar-outer / LDPC-inner concatenated pipeline, and a Monte Carlo BER
simulation harness.
"""

from .channels import (
    ChannelOutput,
    awgn_transmit,
    bec_transmit,
    bi_awgn_capacity,
    ebn0_db_to_sigma,
    sigma_for_capacity,
)
from .concat import ConcatSpec, build_concat_spec, concat_decode, concat_encode
from .decoders import DecodeResult, Quantizer, bp_decode, peel_fixpoint, sc_decode
from .factor_graph import (
    FactorGraph,
    GraphStoppingSet,
    StoppingTree,
    build_graph,
    enumerate_gss,
    girth,
    leaf_size,
    low_weight_count,
    mib,
    min_vss_size,
    mvss_lower_bound,
    mvss_report,
    mvss_search,
    size_distributions,
    stopping_distance,
    stopping_tree,
)
from .ldpc import (
    DegreeDistribution,
    OTN_DEGREE_PAIR,
    ParityCheckMatrix,
    construct_peg,
    ldpc_bp_decode,
    ldpc_encode,
    read_alist,
    tanner_girth,
    write_alist,
)
from .polar import (
    CodeSpec,
    ReliabilityProfile,
    awgn_reliability,
    bhattacharyya_bec,
    bitrev_permutation,
    encode,
    polar_transform,
    read_spec,
    row_weight,
    select_info_set,
    select_info_set_new_rule,
    write_spec,
)
from .sim import SimRecord, SweepConfig, confidence_interval, run_sweep

__version__ = "0.1.0"
