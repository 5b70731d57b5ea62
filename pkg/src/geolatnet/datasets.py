"""Bundled public benchmark networks.

Edge lists use 1-based node ids in the files shipped under ``data/`` and
0-based indices here. Florentine families are indexed alphabetically.
"""

from __future__ import annotations

from .model import Network

__all__ = ["florentine_marriage", "karate_club", "FLORENTINE_NAMES"]

FLORENTINE_NAMES = (
    "Acciaiuoli", "Albizzi", "Barbadori", "Bischeri", "Castellani",
    "Ginori", "Guadagni", "Lamberteschi", "Medici", "Pazzi",
    "Peruzzi", "Ridolfi", "Salviati", "Strozzi", "Tornabuoni",
)

# Padgett's Florentine marriage ties (15 families, 20 marriages), 1-based.
FLORENTINE_EDGES = (
    (1, 9), (2, 6), (2, 7), (2, 9), (3, 5), (3, 9), (4, 7), (4, 11),
    (4, 14), (5, 11), (5, 14), (7, 8), (7, 15), (9, 12), (9, 13),
    (9, 15), (10, 13), (11, 14), (12, 14), (12, 15),
)

# Zachary's karate club (34 members, 78 ties), 1-based.
KARATE_EDGES = (
    (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9),
    (1, 11), (1, 12), (1, 13), (1, 14), (1, 18), (1, 20), (1, 22),
    (1, 32), (2, 3), (2, 4), (2, 8), (2, 14), (2, 18), (2, 20),
    (2, 22), (2, 31), (3, 4), (3, 8), (3, 9), (3, 10), (3, 14),
    (3, 28), (3, 29), (3, 33), (4, 8), (4, 13), (4, 14), (5, 7),
    (5, 11), (6, 7), (6, 11), (6, 17), (7, 17), (9, 31), (9, 33),
    (9, 34), (10, 34), (14, 34), (15, 33), (15, 34), (16, 33),
    (16, 34), (19, 33), (19, 34), (20, 34), (21, 33), (21, 34),
    (23, 33), (23, 34), (24, 26), (24, 28), (24, 30), (24, 33),
    (24, 34), (25, 26), (25, 28), (25, 32), (26, 32), (27, 30),
    (27, 34), (28, 34), (29, 32), (29, 34), (30, 33), (30, 34),
    (31, 33), (31, 34), (32, 33), (32, 34), (33, 34),
)


def florentine_marriage() -> Network:
    """Padgett's Florentine marriage network, N=15."""
    return Network.from_edges(15, [(i - 1, j - 1) for i, j in FLORENTINE_EDGES])


def karate_club() -> Network:
    """Zachary's karate club network, N=34."""
    return Network.from_edges(34, [(i - 1, j - 1) for i, j in KARATE_EDGES])
