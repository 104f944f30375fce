"""Naive per-step reference simulators used as oracles for the vectorised policies.

Each simulator draws every random number as a scalar (or one small vector)
at the moment the algorithm needs it and keeps its statistics in plain
Python lists.  They share only the seeding scheme and the design solver with
the package, so matching traces check the batching and bookkeeping.
"""

import math

import numpy as np

from zcdp_bandits.core import RngStream
from zcdp_bandits.design import frank_wolfe_goptimal


def _streams(seed, run):
    return (RngStream(seed, run, "env").generator(), RngStream(seed, run, "mechanism").generator())


def reference_ucb(means, horizon, beta, rho, seed=0, run=0):
    """AdaC-UCB with doubling episodes; returns per-step pseudo-regret and episode lengths."""
    _, mech = _streams(seed, run)
    K = len(means)
    envs = [RngStream(seed, run, "env", a).generator() for a in range(K)]
    best = max(means)
    private = rho is not None

    def pull(a):
        return 1.0 if envs[a].random() < means[a] else 0.0

    def noisy(rewards):
        n = len(rewards)
        z = mech.standard_normal()
        sd = math.sqrt(1.0 / (2.0 * rho * n * n)) if private else 0.0
        return sum(rewards) / n + sd * z

    regret, lengths = [], [[] for _ in range(K)]
    est, win, pulls = [0.0] * K, [0] * K, [0] * K
    for a in range(K):
        r = pull(a)
        regret.append(best - means[a])
        est[a], win[a], pulls[a] = noisy([r]), 1, 1
    t = K
    while t < horizon:
        t_ell = t + 1
        idx = []
        for a in range(K):
            w = 1.0 / (2.0 * win[a]) + (1.0 / (rho * win[a] ** 2) if private else 0.0)
            idx.append(est[a] + math.sqrt(w * beta * math.log(t_ell)))
        a = max(range(K), key=lambda i: (idx[i], -i))
        length = pulls[a]
        rewards = []
        for _ in range(length):
            if t >= horizon:
                break
            rewards.append(pull(a))
            regret.append(best - means[a])
            t += 1
        pulls[a] += len(rewards)
        lengths[a].append(len(rewards))
        if len(rewards) == length:
            est[a], win[a] = noisy(rewards), length
    return np.array(regret), lengths


def _schedule(support, reps):
    items = []
    for a, n in zip(support, reps):
        for j in range(n):
            items.append(((j + 0.5) / n, len(items), a))
    items.sort()
    return [a for _, _, a in items]


def reference_gope(actions, theta_star, horizon, rho, mode="half-power", delta=0.001, seed=0, run=0,
                   noise_std=1.0, clip=True, tol=1e-2):
    """Phased elimination with one reward draw per play; ``rho=None`` is non-private."""
    env, mech = _streams(seed, run)
    X_all = np.asarray(actions, float)
    K, d = X_all.shape
    mu = X_all @ theta_star
    gaps = mu.max() - mu
    active = list(range(K))
    regret = []
    ell = 1
    while len(regret) < horizon:
        if len(active) == 1:
            regret += [gaps[active[0]]] * (horizon - len(regret))
            break
        beta = 2.0 ** -ell
        X = X_all[active]
        _, s, Vt = np.linalg.svd(X, full_matrices=False)
        U = Vt[: int(np.sum(s > 1e-9 * s[0]))].T
        Y = X @ U
        design = frank_wolfe_goptimal(Y, tol=tol)
        dp = delta / (K * ell * (ell + 1))
        c = 8.0 * d / beta**2 * math.log(4.0 / dp)
        if rho is not None:
            L = math.log(2.0 / dp)
            f = d + 2.0 * math.sqrt(d * L) + 2.0 * L
            c += 2.0 * d / beta * math.sqrt(2.0 / rho * f)
        support = [int(i) for i in np.flatnonzero(design.weights > 0)]
        reps = [int(math.ceil(c * design.weights[i])) for i in support]
        V = np.zeros((Y.shape[1], Y.shape[1]))
        b = np.zeros(Y.shape[1])
        done = True
        for i in _schedule(support, reps):
            if len(regret) >= horizon:
                done = False
                break
            r = mu[active[i]] + noise_std * env.standard_normal()
            if clip:
                r = min(max(r, -1.0), 1.0)
            regret.append(gaps[active[i]])
            V += np.outer(Y[i], Y[i])
            b += r * Y[i]
        if not done:
            break
        theta = np.linalg.solve(V, b)
        if rho is not None and mode == "half-power":
            z = mech.standard_normal(Y.shape[1])
            w, Q = np.linalg.eigh(V)
            theta = theta + (Q / np.sqrt(w)) @ Q.T @ (math.sqrt(2.0 * d / (rho * c)) * z)
        elif rho is not None:
            noise = np.zeros(Y.shape[1])
            for i in support:
                noise += Y[i] * math.sqrt(2.0 / rho) * mech.standard_normal()
            theta = theta + np.linalg.solve(V, noise)
        scores = Y @ theta
        active = [a for a, s_ in zip(active, scores) if scores.max() - s_ <= 2.0 * beta]
        ell += 1
    return np.array(regret[:horizon])


def reference_oful(contexts, theta_star, horizon, rho, lam=0.1, C=1.0, delta=0.001, seed=0, run=0,
                   noise_std=1.0, clip=True, theta_bound=1.0):
    """Rarely-switching OFUL with one context set and one reward per step; returns (regret, updates)."""
    env, mech = _streams(seed, run)
    ctx = RngStream(seed, run, "contexts").generator()
    d = contexts.dim
    lam0 = contexts.lambda0
    V = lam * np.eye(d)
    b = np.zeros(d)
    noise = np.zeros(d)
    det_tau = np.linalg.det(V)
    theta = np.zeros(d)
    V_inv = np.eye(d) / lam
    ell = 0

    def width(t):
        beta = math.sqrt(2.0 * math.log(1.0 / delta) + d * math.log(1.0 + t / (lam * d)))
        beta += math.sqrt(lam) * theta_bound
        if rho is None or ell == 0:
            return beta
        L = math.log((t + 3.0) * d / delta)
        g = lam0 * t / 4.0 - 8.0 * L - 2.0 * math.sqrt(t * L)
        Lt = math.log(horizon / delta)
        f = d + 2.0 * math.sqrt(d * Lt) + 2.0 * Lt
        return beta + math.sqrt(2.0 * ell / rho * f / max(lam, lam + g))

    w = width(1)
    regret = []
    for t in range(1, horizon + 1):
        if np.linalg.det(V) > (1.0 + C) * det_tau:
            if rho is not None:
                noise = noise + math.sqrt(2.0 / rho) * mech.standard_normal(d)
            ell += 1
            theta = np.linalg.solve(V, b + noise)
            V_inv = np.linalg.inv(V)
            det_tau = np.linalg.det(V)
            w = width(max(t - 1, 1))
        A = contexts.sample(contexts.k, ctx)
        ucb = [a @ theta + w * math.sqrt(a @ V_inv @ a) for a in A]
        i = int(np.argmax(ucb))
        a = A[i]
        r = a @ theta_star + noise_std * env.standard_normal()
        if clip:
            r = min(max(r, -1.0), 1.0)
        regret.append(max(x @ theta_star for x in A) - a @ theta_star)
        V = V + np.outer(a, a)
        b = b + r * a
    return np.array(regret), ell
