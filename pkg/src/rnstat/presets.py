"""Ready-made experiment configurations for the relative-precision panels.

Each preset is a full JSON-serializable config for the ``simulate`` command
(``fig8`` for ``case-study``) reproducing one figure's grid at desk scale.
The EM-based panels default to 1000 replicates and the closed-form panels to
10000; raise them from the command line when tighter ratios are wanted.
"""

from __future__ import annotations

ZETA_GRID = [round(0.1 * i, 1) for i in range(11)]
LAMBDA_FINE = [round(1.0 + 0.1 * i, 1) for i in range(41)]
RHO_PANEL = [[0.4, 0.3, 0.2, 0.1], [0.1, 0.2, 0.3, 0.4],
             [0.2, 0.0, 0.0, 0.8], [0.0, 0.0, 0.0, 1.0]]
FIXED_K_RHOS = [[0.0] * (k - 1) + [1.0] for k in (2, 3, 4, 5)]
TYPE3_ZETAS = [0.0, 0.25, 0.75, 1.0]


def _complete_panels(estimator: str, replicates: int) -> list:
    return [
        {"label": "phr", "family": "phr-exp", "estimator": estimator,
         "data_type": "complete", "gammas": [1.0], "zetas": ZETA_GRID,
         "rhos": FIXED_K_RHOS, "m": 10, "replicates": replicates},
        {"label": "prhr", "family": "prhr-beta", "estimator": estimator,
         "data_type": "complete", "gammas": [1.0], "zetas": ZETA_GRID,
         "rhos": FIXED_K_RHOS, "m": 10, "replicates": replicates},
    ]


def _incomplete_panels(family: str, estimator_prefix: str,
                       replicates: int) -> list:
    # the generating zeta for the panels that do not sweep it: the
    # high-information extreme of the family
    zeta_gen = 1.0 if family.startswith("phr") else 0.0
    if estimator_prefix == "em":
        names = ["em_type1", "em_type2", "em_type3"]
        em = {"zeta_known": True, "rho_known": True}
    else:
        names = ["mm", "mm", "mm"]
        em = {}
    return [
        {"label": "type1", "family": family, "estimator": names[0],
         "data_type": "type1", "gammas": [1.0, 2.0, 3.0, 4.0],
         "zetas": ZETA_GRID, "rhos": [RHO_PANEL[0]], "m": 10,
         "replicates": replicates, **({"em": em} if em else {})},
        {"label": "type2", "family": family, "estimator": names[1],
         "data_type": "type2", "gammas": LAMBDA_FINE, "zetas": [zeta_gen],
         "rhos": RHO_PANEL, "m": 10, "replicates": replicates,
         **({"em": em} if em else {})},
        {"label": "type3", "family": family, "estimator": names[2],
         "data_type": "type3", "gammas": LAMBDA_FINE, "zetas": TYPE3_ZETAS,
         "rhos": RHO_PANEL, "m": 10, "replicates": replicates,
         **({"em": em} if em else {})},
    ]


def build_presets() -> dict:
    return {
        "fig1": {"command": "simulate", "config": {
            "experiments": _complete_panels("complete_ml", 10_000),
            "master_seed": 1001, "output": "fig1.csv"}},
        "fig2": {"command": "simulate", "config": {
            "experiments": _incomplete_panels("phr-exp", "em", 1000),
            "master_seed": 1002, "output": "fig2.csv"}},
        "fig3": {"command": "simulate", "config": {
            "experiments": _incomplete_panels("prhr-beta", "em", 1000),
            "master_seed": 1003, "output": "fig3.csv"}},
        "fig4": {"command": "simulate", "config": {
            "experiments": _complete_panels("mm", 10_000),
            "master_seed": 1004, "output": "fig4.csv"}},
        "fig5": {"command": "simulate", "config": {
            "experiments": _incomplete_panels("phr-exp", "mm", 10_000),
            "master_seed": 1005, "output": "fig5.csv"}},
        "fig6": {"command": "simulate", "config": {
            "experiments": _incomplete_panels("prhr-beta", "mm", 10_000),
            "master_seed": 1006, "output": "fig6.csv"}},
        "fig8": {"command": "case-study", "config": {
            "population": {"mode": "synthetic", "n": 3033, "lambda": 0.3902,
                           "kendall_tau": 0.4},
            "zeta_grid": ZETA_GRID,
            "rhos": [[0.4, 0.3, 0.2, 0.1], [0.1, 0.2, 0.3, 0.4],
                     [0.0, 0.0, 0.0, 1.0]],
            "em_inits": [{"zeta_init": 1.0,
                          "rho_init": [0.25, 0.25, 0.25, 0.25]}],
            "ranking": ["perfect", "imperfect"],
            "m": 10, "replicates": 1000, "master_seed": 1008,
            "output": "fig8.csv"}},
    }


PRESETS = build_presets()
