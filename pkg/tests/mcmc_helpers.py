"""Monte Carlo error estimates used by the statistical tests."""
import numpy as np


def autocovariance(x):
    x = np.asarray(x, dtype=float) - np.mean(x)
    n = x.size
    f = np.fft.rfft(x, n=2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    return acov


def effective_sample_size(x):
    """Geyer's initial monotone sequence estimator."""
    acov = autocovariance(x)
    if acov[0] == 0:
        return float(len(x))
    rho = acov / acov[0]
    pairs = rho[:-1:2] + rho[1::2]
    # truncate at the first non-positive pair sum, then enforce monotonicity
    stop = np.argmax(pairs <= 0) if np.any(pairs <= 0) else pairs.size
    pairs = np.minimum.accumulate(pairs[:stop])
    tau = -1.0 + 2.0 * pairs.sum()
    return len(x) / max(tau, 1e-12)


def mcse(x):
    """Standard error of the mean of an autocorrelated chain."""
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1) / np.sqrt(effective_sample_size(x)))


def iid_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1) / np.sqrt(x.size))
