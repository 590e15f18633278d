"""Complete elliptic integral of the first kind via the arithmetic-geometric mean."""

import math

AGM_TOL = 1e-14
_MAX_ITER = 64


def _agm(a, b):
    for _ in range(_MAX_ITER):
        if abs(a - b) <= AGM_TOL * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def complete_elliptic_k(k):
    """Complete elliptic integral of the first kind, K(k) = pi / (2 AGM(1, sqrt(1-k^2))).

    Parameters
    ----------
    k : float
        Modulus (not the parameter m = k**2), 0 <= k < 1.

    Raises
    ------
    ValueError
        If ``k`` is negative or ``k >= 1`` where K diverges logarithmically.
    """
    k = float(k)
    if not 0.0 <= k < 1.0:
        raise ValueError(f"elliptic modulus must satisfy 0 <= k < 1, got {k!r}")
    kc = math.sqrt((1.0 - k) * (1.0 + k))
    return math.pi / (2.0 * _agm(1.0, kc))


def complementary_elliptic_k(k):
    """K'(k) = K(sqrt(1 - k^2)) for 0 < k <= 1.

    Evaluated directly as pi / (2 AGM(1, k)) so that no precision is lost
    forming sqrt(1 - k^2) for small k.
    """
    k = float(k)
    if not 0.0 < k <= 1.0:
        raise ValueError(f"complementary modulus requires 0 < k <= 1, got {k!r}")
    return math.pi / (2.0 * _agm(1.0, k))
