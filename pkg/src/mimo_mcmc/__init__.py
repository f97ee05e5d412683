"""MCMC detection for MIMO channels.

Library layout:
    model        constellation arithmetic, channels, detection instances
    sampler      Metropolis-adjusted discrete Langevin chains
    llr          soft bit outputs from sample pools
    oracle       exhaustive small-instance references and kernel spectra
    baselines    MMSE, Gibbs, and the unadjusted-proposal control
    experiments  reproducible experiment runners and file outputs
"""

from .baselines import gibbs_step, mmse_detect, run_gibbs_chain, unadjusted_langevin_step
from .llr import LlrVector, SampleList, hard_decision, llr_importance, llr_list, logsumexp_stream
from .model import (
    ChannelSpec,
    Constellation,
    DetectionInstance,
    build_constellation,
    demap_bits,
    generate_channel,
    map_bits,
    perturb_csi,
    random_instance,
    snr_to_sigma2,
    transmit,
)
from .oracle import (
    STATE_CAP,
    OracleCapError,
    build_transition_matrix,
    convergence_rate,
    detailed_balance_check,
    empirical_distribution,
    enumerate_states,
    exact_llr,
    exact_map,
    exact_posterior,
    stationary_distribution,
    tv_decay_curve,
    tv_distance,
    unadjusted_transition_matrix,
)
from .sampler import (
    SamplerConfig,
    acceptance_probability,
    build_proposal,
    chain_rng,
    compute_preconditioner,
    default_config,
    dmala_step,
    init_state,
    metric,
    metric_gradient,
    proposal_log_prob,
    run_chain,
    run_parallel_chains,
    sample_proposal,
)
from .experiments import ExperimentConfig, ResultRecord, load_config, run_experiment

__version__ = "0.1.0"
