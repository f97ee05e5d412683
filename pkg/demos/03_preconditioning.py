"""Why the gradient gets a matrix in front of it.

As noise vanishes, the target sharpens along the channel's weak directions and
a naive per-coordinate step either overshoots or freezes: the convergence rate
drifts toward 1. Damped-inverse-Gram preconditioning rescales the drift so the
proposal respects the channel geometry. This sweep measures the exact rate of
both kernels across SNR on a batch of random channels; smaller is faster.
"""

import numpy as np

from mimo_mcmc import (
    ChannelSpec,
    build_transition_matrix,
    convergence_rate,
    default_config,
    random_instance,
)


def median_rate(mode: str, snr_db: float, n_trials: int) -> float:
    rates = []
    for i in range(n_trials):
        rng = np.random.default_rng(np.random.SeedSequence((3, int(snr_db * 10), i)))
        instance = random_instance(ChannelSpec(nt=2, nr=2), q=2, snr_db=snr_db, rng=rng)
        tm = build_transition_matrix(instance, default_config(instance, mode=mode))
        rates.append(convergence_rate(tm.p, tm.pi)[0])
    return float(np.median(rates))


def main():
    snrs = (4.0, 6.0, 8.0, 10.0)
    n_trials = 60
    print(f"median convergence rate over {n_trials} random 2x2 QPSK channels")
    print(f"{'SNR':>6} {'naive':>8} {'preconditioned':>15}")
    naive_rates = {}
    for snr in snrs:
        naive_rates[snr] = median_rate("naive", snr, n_trials)
        pre = median_rate("preconditioned", snr, n_trials)
        print(f"{snr:>5.0f}dB {naive_rates[snr]:>8.4f} {pre:>15.4f}")
    if naive_rates[10.0] > naive_rates[4.0]:
        print("\nthe naive kernel slows down as SNR rises (rate climbing toward 1);")
        print("the preconditioned kernel holds its speed where the decisions get easy")


if __name__ == "__main__":
    main()
