"""Numpy fallback for the parallel-tempering kernel.

Same signature and random-number consumption order as the compiled
``_pt_kernel.pt_sweeps``: flips are vectorised across chains proposal by
proposal, swaps run sequentially from the hottest pair upward.
"""

import numpy as np

LOG2 = np.log(2.0)


def _re_log_cosh(x, y):
    ax = np.abs(x)
    e2 = np.exp(-2.0 * ax)
    return ax - LOG2 + 0.5 * np.log1p(e2 * e2 + 2.0 * np.cos(2.0 * y) * e2)


def _row_sums(v):
    # sequential left-to-right sum, matching the compiled kernel bit for bit
    acc = np.zeros(v.shape[0])
    for j in range(v.shape[1]):
        acc = acc + v[:, j]
    return acc


def pt_sweeps(a_re, w_re, w_im, sigma, th_re, th_im, logp, betas, sites, flip_u, swap_u, out, out_start, thin, stats):
    n_sweeps = flip_u.shape[0]
    n_chains, n = sigma.shape
    chains = np.arange(n_chains)
    row = out_start
    base = _row_sums(_re_log_cosh(th_re, th_im))
    for s in range(n_sweeps):
        for k in range(n):
            live = sites[s, :, k] < n
            i = np.minimum(sites[s, :, k], n - 1)
            delta = np.where(sigma[chains, i] == 1, -1.0, 1.0)
            nre = th_re + delta[:, None] * w_re[i]
            nim = th_im + delta[:, None] * w_im[i]
            new = _row_sums(_re_log_cosh(nre, nim))
            dre = delta * a_re[i] + (new - base)
            arg = 2.0 * betas * dre
            with np.errstate(over="ignore"):
                accept = live & ((arg >= 0.0) | (flip_u[s, :, k] < np.exp(np.minimum(arg, 0.0))))
            stats[0] += int(accept.sum())
            stats[1] += int(live.sum())
            sigma[accept, i[accept]] = 1 - sigma[accept, i[accept]]
            th_re[accept] = nre[accept]
            th_im[accept] = nim[accept]
            base[accept] = new[accept]
            logp[accept] += 2.0 * dre[accept]
        for c in range(n_chains - 1):
            arg = (betas[c] - betas[c + 1]) * (logp[c + 1] - logp[c])
            stats[3] += 1
            if arg >= 0.0 or swap_u[s, c] < np.exp(arg):
                stats[2] += 1
                pair = [c + 1, c]
                sigma[[c, c + 1]] = sigma[pair]
                th_re[[c, c + 1]] = th_re[pair]
                th_im[[c, c + 1]] = th_im[pair]
                logp[[c, c + 1]] = logp[pair]
                base[[c, c + 1]] = base[pair]
        if row < out.shape[0] and (s + 1) % thin == 0:
            out[row] = sigma[n_chains - 1]
            row += 1
    return row
