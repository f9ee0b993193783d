# Services package initialization

# Published values the reproduction report compares against
REFERENCE_VALUES = {
    "rate_table": {
        "first_lens": [15.0, 2.8, 0.52],
        "fiber": [6.5, 0.52, 0.041],
        "tomography": [4.5, 0.25, 0.014],
    },
    "first_lens_brightness": 0.186,
    "f_sp": 0.65,
    "f_sp_uncertainty": 0.01,
    "f_s2p": 0.59,
    "s_x": -0.915,
    "cluster_fidelities": [0.80, 0.63, 0.50, 0.41],
    "truth_table_hv": {"p_v_up": 0.87, "p_h_down": 0.96},
    "fit_parameters": {"g_e": 0.60, "g_h": 0.3, "theta": 0.4, "sigma_o_mT": 10.5},
    "fit_uncertainties": {"g_e": 0.02, "g_h": 0.1, "theta": 0.1, "sigma_o_mT": 1.0},
}

TOLERANCES = {
    "first_lens_brightness": 0.001,
    "f_sp": 0.01,
    "cluster_fidelities": 0.03,
    "truth_table_hv": 0.08,
    "larmor_period": 0.05,
}
