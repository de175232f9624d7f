"""Brute-force reference implementations used to cross-check the library.

Everything here is written in plain loops, directly from the estimator
definitions, with no shared code with src/. Slow on purpose; only ever run
on tiny inputs inside the test suite.
"""

import math


def uw_mean(y):
    total = 0.0
    for v in y:
        total += v
    return total / len(y)


def weighted_mean(y, w):
    num = 0.0
    den = 0.0
    for yi, wi in zip(y, w):
        num += wi * yi
        den += wi
    return num / den


def hajek_mean(y, pi):
    num = 0.0
    den = 0.0
    for yi, p in zip(y, pi):
        num += yi / p
        den += 1.0 / p
    return num / den


def model_based_mean(y_sample, yhat_sample, yhat_synth, multiplicity, n_hat):
    total = 0.0
    for yi, fi in zip(y_sample, yhat_sample):
        total += yi - fi
    for fj, mj in zip(yhat_synth, multiplicity):
        total += mj * fj
    return total / n_hat


def aipw_mean(y_sample, yhat_sample, pi_sample, yhat_synth, multiplicity, n_hat):
    total = 0.0
    for yi, fi, p in zip(y_sample, yhat_sample, pi_sample):
        total += (yi - fi) / p
    for fj, mj in zip(yhat_synth, multiplicity):
        total += mj * fj
    return total / n_hat


def rubin_point(values):
    return uw_mean(values)


def rubin_variance(values):
    b = len(values)
    bar = uw_mean(values)
    ss = 0.0
    for v in values:
        ss += (v - bar) ** 2
    return (b + 1.0) / (b * (b - 1.0)) * ss


def rubin_df(m, h, b):
    return max(min(m - h, b - 1), 1)


def logistic_deviance(x_rows, y, w, beta):
    dev = 0.0
    for row, yi, wi in zip(x_rows, y, w):
        eta = 0.0
        for xj, bj in zip(row, beta):
            eta += xj * bj
        p = 1.0 / (1.0 + math.exp(-eta))
        p = min(max(p, 1e-12), 1.0 - 1e-12)
        if yi > 0:
            dev += -2.0 * wi * yi * math.log(p / yi)
        if yi < 1:
            dev += -2.0 * wi * (1.0 - yi) * math.log((1.0 - p) / (1.0 - yi))
    return dev


def logistic_grid_mle(x_rows, y, w, lo, hi, rounds=8, points=41):
    """Two-parameter MLE by repeatedly refined grid search on the deviance."""
    best = None
    b0_lo, b0_hi = lo[0], hi[0]
    b1_lo, b1_hi = lo[1], hi[1]
    for _ in range(rounds):
        best = None
        for i in range(points):
            b0 = b0_lo + (b0_hi - b0_lo) * i / (points - 1)
            for j in range(points):
                b1 = b1_lo + (b1_hi - b1_lo) * j / (points - 1)
                d = logistic_deviance(x_rows, y, w, (b0, b1))
                if best is None or d < best[0]:
                    best = (d, b0, b1)
        _, c0, c1 = best
        span0 = (b0_hi - b0_lo) / (points - 1) * 2.0
        span1 = (b1_hi - b1_lo) / (points - 1) * 2.0
        b0_lo, b0_hi = c0 - span0, c0 + span0
        b1_lo, b1_hi = c1 - span1, c1 + span1
    return best[1], best[2]


def matern_32(d, rho):
    return (1.0 + d / rho) * math.exp(-d / rho)


def dense_penalized_solve(design_rows, penalty_rows, y, w, lam):
    """Solve (D'WD + lam*P) c = D'Wy by Gaussian elimination, loops only."""
    n = len(design_rows)
    q = len(design_rows[0])
    s = [[0.0] * q for _ in range(q)]
    b = [0.0] * q
    for i in range(n):
        for a in range(q):
            da = design_rows[i][a]
            b[a] += w[i] * da * y[i]
            for c in range(q):
                s[a][c] += w[i] * da * design_rows[i][c]
    for a in range(q):
        for c in range(q):
            s[a][c] += lam * penalty_rows[a][c]
    # partial-pivot elimination
    aug = [s[a] + [b[a]] for a in range(q)]
    for col in range(q):
        piv = max(range(col, q), key=lambda r: abs(aug[r][col]))
        aug[col], aug[piv] = aug[piv], aug[col]
        div = aug[col][col]
        for r in range(q):
            if r == col:
                continue
            f = aug[r][col] / div
            for cc in range(col, q + 1):
                aug[r][cc] -= f * aug[col][cc]
    return [aug[a][q] / aug[a][a] for a in range(q)]


def metrics(points, variances, ci_low, ci_high, truth):
    k = len(points)
    errs = [p - truth for p in points]
    rbias = 100.0 * uw_mean(errs) / truth
    rmse = 100.0 * math.sqrt(uw_mean([e * e for e in errs])) / truth
    cover = 0.0
    length = 0.0
    for lo, hi in zip(ci_low, ci_high):
        if lo <= truth <= hi:
            cover += 1.0
        length += hi - lo
    crci = 100.0 * cover / k
    rlci = 100.0 * (length / k) / abs(truth)
    mean_se = uw_mean([math.sqrt(v) for v in variances])
    bar = uw_mean(points)
    emp = math.sqrt(sum((p - bar) ** 2 for p in points) / (k - 1))
    rse = mean_se / emp
    return {"rbias": rbias, "rmse": rmse, "crci": crci, "rlci": rlci, "rse": rse}
