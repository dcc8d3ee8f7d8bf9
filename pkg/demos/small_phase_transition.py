"""Coarse noiseless phase transition on a partial DCT matrix, printed as a grid."""

from oamp.harness import PTCConfig, phase_transition

cfg = PTCConfig(N=256, m_ratios=(0.2, 0.4, 0.6, 0.8), k_ratios=(0.1, 0.3, 0.5, 0.7),
                trials=5, T=40)
rows = phase_transition(cfg)
succ = {(r.m_ratio, r.k_ratio, r.algorithm): r.success for r in rows}
for alg in ("AMP", "OAMP-LMMSE"):
    print(alg, "(rows: K/M, columns: M/N)")
    for k in reversed(cfg.k_ratios):
        print(f"  {k:4.1f} " + " ".join(f"{succ[(m, k, alg)]:4.1f}" for m in cfg.m_ratios))
    print("       " + " ".join(f"{m:4.1f}" for m in cfg.m_ratios))
