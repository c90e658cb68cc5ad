"""Independent reference implementations used as test oracles.

Everything here is written in plain Python scalars/loops, deliberately not
sharing code with the package under test.
"""
import math

import numpy as np


# --------------------------------------------------------------------------
# single-step optimizer oracles on a scalar parameter (first step, t=1,
# zero-initialised state unless stated)


def sgd_step(w, g, lr):
    return w - lr * g


def sgd_momentum_step(w, g, lr, mu, v=0.0):
    v = mu * v - lr * g
    return w + v


def adam_step(w, g, lr, b1, b2, eps, t=1, m=0.0, v=0.0):
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mh = m / (1 - b1 ** t)
    vh = v / (1 - b2 ** t)
    return w - lr * mh / (math.sqrt(vh) + eps)


def nadam_step(w, g, lr, b1, b2, eps, t=1, m=0.0, v=0.0):
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mbar = b1 * m / (1 - b1 ** (t + 1)) + (1 - b1) * g / (1 - b1 ** t)
    vh = v / (1 - b2 ** t)
    return w - lr * mbar / (math.sqrt(vh) + eps)


def adamax_step(w, g, lr, b1, b2, eps, t=1, m=0.0, u=0.0):
    m = b1 * m + (1 - b1) * g
    u = max(b2 * u, abs(g))
    return w - lr / (1 - b1 ** t) * m / (u + eps)


def adadelta_step(w, g, lr, rho, eps, eg=0.0, ed=0.0):
    eg = rho * eg + (1 - rho) * g * g
    dx = -math.sqrt(ed + eps) / math.sqrt(eg + eps) * g
    return w + lr * dx


def adagrad_step(w, g, lr, eps, acc=0.0):
    acc = acc + g * g
    return w - lr * g / (math.sqrt(acc) + eps)


def rmsprop_step(w, g, lr, rho, eps, acc=0.0):
    acc = rho * acc + (1 - rho) * g * g
    return w - lr * g / (math.sqrt(acc) + eps)


def ftrl_step(w, g, alpha, beta, l1, l2, z=0.0, n=0.0):
    if g == 0.0:
        return w
    n_new = n + g * g
    sigma = (math.sqrt(n_new) - math.sqrt(n)) / alpha
    z = z + g - sigma * w
    if abs(z) <= l1:
        return 0.0
    sign = 1.0 if z > 0 else -1.0
    return -(z - sign * l1) / ((beta + math.sqrt(n_new)) / alpha + l2)


# --------------------------------------------------------------------------
# metrics


def recount(probs, labels, threshold):
    """Naive per-element confusion counts and derived metrics."""
    tp = fp = tn = fn = 0
    for p, y in zip(probs, labels):
        pred = 1 if p >= threshold else 0
        if pred == 1 and y == 1:
            tp += 1
        elif pred == 1 and y == 0:
            fp += 1
        elif pred == 0 and y == 0:
            tn += 1
        else:
            fn += 1

    def ratio(a, b):
        return a / b if b else 0.0

    pa, ra = ratio(tp, tp + fp), ratio(tp, tp + fn)
    pb, rb = ratio(tn, tn + fn), ratio(tn, tn + fp)
    fa = ratio(2 * pa * ra, pa + ra)
    fb = ratio(2 * pb * rb, pb + rb)
    return {
        "tn": tn, "fp": fp, "fn": fn, "tp": tp,
        "accuracy": ratio(tp + tn, tp + tn + fp + fn),
        "precision_attack": pa, "recall_attack": ra, "f1_attack": fa,
        "precision_benign": pb, "recall_benign": rb, "f1_benign": fb,
        "false_positive_rate": ratio(fp, fp + tn),
    }


def mann_whitney_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def pearson_two_pass(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def numeric_gradient(f, w, h=1e-5):
    g = np.zeros_like(w)
    for idx in np.ndindex(w.shape):
        orig = w[idx]
        w[idx] = orig + h
        up = f()
        w[idx] = orig - h
        down = f()
        w[idx] = orig
        g[idx] = (up - down) / (2 * h)
    return g
