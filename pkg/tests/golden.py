"""Golden values transcribed from the reference spectral-radius and strong-error tables."""

TABLE_METHODS = ("dssbm", "ssamm+", "ssamm-", "mssbm", "mssamm+", "mssamm-")

# m -> list of (h, ((rho, stable), ...)) in TABLE_METHODS order
SPECTRAL_TABLES = {
    9: [
        (1.0, ((1.1, False), (0.24, True), (4.48, False), (0.97, True), (0.19, True), (4.18, False))),
        (0.9, ((1.05, False), (0.04, True), (3.77, False), (0.94, True), (0.04, True), (3.55, False))),
        (0.8, ((1.0, False), (0.07, True), (3.14, False), (0.91, True), (0.07, True), (2.99, False))),
        (0.7, ((0.95, True), (0.13, True), (2.58, False), (0.88, True), (0.12, True), (2.49, False))),
        (0.6, ((0.9, True), (0.19, True), (2.11, False), (0.85, True), (0.18, True), (2.05, False))),
        (0.5, ((0.86, True), (0.31, True), (1.71, False), (0.82, True), (0.28, True), (1.69, False))),
        (0.4, ((0.82, True), (0.45, True), (1.39, False), (0.8, True), (0.42, True), (1.38, False))),
        (0.3, ((0.8, True), (0.58, True), (1.14, False), (0.79, True), (0.56, True), (1.15, False))),
        (0.2, ((0.8, True), (0.7, True), (0.98, True), (0.8, True), (0.69, True), (0.99, True))),
        (0.1, ((0.86, True), (0.83, True), (0.91, True), (0.86, True), (0.83, True), (0.92, True))),
    ],
    11: [
        (1.0, ((2.21, False), (0.48, True), (8.98, False), (1.8, False), (0.34, True), (7.85, False))),
        (0.9, ((2.06, False), (0.09, True), (7.38, False), (1.71, False), (0.06, True), (6.52, False))),
        (0.8, ((1.91, False), (0.12, True), (5.96, False), (1.61, False), (0.1, True), (5.33, False))),
        (0.7, ((1.75, False), (0.2, True), (4.73, False), (1.5, False), (0.17, True), (4.29, False))),
        (0.6, ((1.58, False), (0.3, True), (3.68, False), (1.39, False), (0.26, True), (3.39, False))),
        (0.5, ((1.41, False), (0.51, True), (2.8, False), (1.27, False), (0.43, True), (2.62, False))),
        (0.4, ((1.24, False), (0.68, True), (2.09, False), (1.15, False), (0.6, True), (2.0, False))),
        (0.3, ((1.08, False), (0.79, True), (1.55, False), (1.04, False), (0.73, True), (1.51, False))),
        (0.2, ((0.96, True), (0.84, True), (1.17, False), (0.95, True), (0.81, True), (1.17, False))),
        (0.1, ((0.91, True), (0.88, True), (0.97, True), (0.91, True), (0.88, True), (0.97, True))),
    ],
    13: [
        (1.0, ((4.15, False), (0.9, True), (16.86, False), (3.18, False), (0.58, True), (14.0, False))),
        (0.9, ((3.83, False), (0.16, True), (13.7, False), (2.98, False), (0.11, True), (11.49, False))),
        (0.8, ((3.49, False), (0.2, True), (10.91, False), (2.77, False), (0.16, True), (9.26, False))),
        (0.7, ((3.13, False), (0.32, True), (8.49, False), (2.53, False), (0.27, True), (7.3, False))),
        (0.6, ((2.75, False), (0.53, True), (6.42, False), (2.28, False), (0.4, True), (5.62, False))),
        (0.5, ((2.36, False), (0.86, True), (4.7, False), (2.02, False), (0.68, True), (4.2, False))),
        (0.4, ((1.96, False), (1.08, False), (3.31, False), (1.73, False), (0.9, True), (3.03, False))),
        (0.3, ((1.58, False), (1.15, False), (2.25, False), (1.45, False), (1.02, False), (2.12, False))),
        (0.2, ((1.23, False), (1.08, False), (1.5, False), (1.18, False), (1.01, False), (1.46, False))),
        (0.1, ((1.0, False), (0.97, True), (1.06, False), (0.99, True), (0.95, True), (1.06, False))),
    ],
}

# h -> strong error per method at T = 1, d = m = 5
STRONG_ERRORS = {
    2.0 ** -1: {"dssbm": 2.207e-1, "mssbm": 3.335e-1, "ssamm-": 1.243e-1, "mssamm-": 1.977e-1},
    2.0 ** -2: {"dssbm": 1.148e-1, "mssbm": 1.340e-1, "ssamm-": 8.368e-2, "mssamm-": 1.029e-1},
    2.0 ** -3: {"dssbm": 6.241e-2, "mssbm": 5.988e-2, "ssamm-": 4.683e-2, "mssamm-": 4.641e-2},
    2.0 ** -4: {"dssbm": 3.480e-2, "mssbm": 3.159e-2, "ssamm-": 2.361e-2, "mssamm-": 2.425e-2},
    2.0 ** -5: {"dssbm": 1.511e-2, "mssbm": 1.572e-2, "ssamm-": 1.339e-2, "mssamm-": 1.439e-2},
    2.0 ** -6: {"dssbm": 7.090e-3, "mssbm": 8.037e-3, "ssamm-": 6.760e-3, "mssamm-": 6.411e-3},
    2.0 ** -7: {"dssbm": 3.960e-3, "mssbm": 4.354e-3, "ssamm-": 3.637e-3, "mssamm-": 3.294e-3},
    2.0 ** -8: {"dssbm": 2.112e-3, "mssbm": 1.901e-3, "ssamm-": 1.575e-3, "mssamm-": 1.774e-3},
}


def table_cells(m):
    """Yield (h, method, rho, stable) for one reference table."""
    for h, vals in SPECTRAL_TABLES[m]:
        for name, (rho, stable) in zip(TABLE_METHODS, vals):
            yield h, name, rho, stable
