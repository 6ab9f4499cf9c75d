"""Small, fast argument sets for every subcommand (shared by the CLI and acceptance tests)."""

CASES = {
    "sample": ["--N", "2", "--count", "3"],
    "evolve": ["--alpha", "1.5", "--N", "4", "--modes", "k=1,c=1", "--T", "1"],
    "invariance": ["--N", "1", "--ensemble", "500", "--T", "0.2"],
    "converge": ["--N-list", "2,4", "--T", "0.1", "--n-out", "5"],
    "converge-renorm": ["--N_list", "2,4", "--T", "0.1", "--n_out", "5"],
    "measure": ["--M_list", "2,4", "--trials", "500"],
    "tails": ["--trials", "500", "--ld_trials", "5000", "--M", "4", "--N", "16"],
    "counting": ["--N_list", "8,16,32", "--queries", "10", "--n_max", "8"],
    "strichartz": ["--N_list", "4,8", "--samples", "1"],
    "bourgain": ["--N", "2", "--T", "2", "--dt", "0.01", "--stride", "1"],
    "recurrence": ["--N", "0", "--T_max", "20"],
    "identities": ["--N", "4", "--samples", "50"],
}
