"""Regenerate src/pbnc/thresholds.json.

The thresholds file is the frozen reference for every regression band the
CLI and the acceptance tests consult: scan curves per truncation size,
polynomial-bound probe values for the anticommuting family, scaled
certificate bands for the calibrated-unitary experiment, and the weight
modulus cap.  Each number below is computed by the library itself at a
pinned seed and configuration, printed, and written out.  Nothing else in
the repository recomputes these silently; if the library changes in a way
that moves them, rerun

    python3 tools/freeze_thresholds.py

inspect the diff, and commit the new file deliberately.

Bands are intentionally loose (a few percent) where the quantity is a
"best found over restarts" maximization whose exact value may wiggle with
BLAS rounding across platforms, and tight (1e-6 relative) where the
quantity is deterministic given the seed.
"""

from __future__ import annotations

import json
import math
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pbnc.counterexample import PbSearch, build_T, cb_certificate, fcn_experiment, pb_probe
from pbnc.coeff_systems import car_jordan_wigner
from pbnc.hankel import MultiplierSeq, ProbeConfig, bound_scan, lacunary_default
from pbnc.martingale import eta_modulus_sup

OUT = Path(__file__).resolve().parents[1] / "src" / "pbnc" / "thresholds.json"

SCAN_SEED = 11
SCAN_GRID = [17, 65, 257, 513]
SCAN_PROBE = {"n_random": 16, "ascent_restarts": 2, "ascent_steps": 24}

PB_SEED = 7
PB_RESTARTS = 4
PB_N_GRID = [2, 3, 4]

FCN_SEED = 42
FCN_C = 2.0
FCN_N_GRID = [2, 4, 8]


def freeze_scan() -> dict:
    cfg = ProbeConfig(**SCAN_PROBE)
    out = {"seed": SCAN_SEED, "d_grid": SCAN_GRID, "probe": dict(SCAN_PROBE),
           "rel_tol": 1e-6}
    for family in ("lacunary", "ones"):
        t0 = time.perf_counter()
        rows = bound_scan(family, SCAN_GRID, cfg, seed=SCAN_SEED)
        vals = [r.best_ratio for r in rows]
        out[family] = vals
        print(f"scan {family}: {['%.9f' % v for v in vals]}"
              f"  [{time.perf_counter() - t0:.1f}s]")
    out["plateau_cap"] = round(max(out["lacunary"]) * 1.005, 9)
    return out


def freeze_pb_car() -> dict:
    values, sims = {}, {}
    for n in PB_N_GRID:
        system = car_jordan_wigner(n)
        spec = lacunary_default(n)
        bundle = build_T(system, spec, MultiplierSeq.indicator(spec), eps=1.0)
        search = PbSearch(restarts=PB_RESTARTS, seed=PB_SEED)
        pb = pb_probe(bundle, search)
        cb = cb_certificate(bundle)
        values[str(n)] = pb
        sims[str(n)] = cb
        print(f"pb_car n={n}: pb={pb:.9f} cb={cb:.9f}")
    return {"eps": 1.0, "seed": PB_SEED, "search_restarts": PB_RESTARTS,
            "values": values, "sim": sims, "band_lo": 0.98, "band_hi": 1.02}


def freeze_fcn() -> dict:
    scaled, log_scaled = [], []
    for n in FCN_N_GRID:
        t0 = time.perf_counter()
        row = fcn_experiment(n, FCN_C, seed=FCN_SEED)
        scaled.append(row["scaled"])
        ls = row["similarity_lower"] / ((FCN_C - 1.0) * math.sqrt(math.log(row["N"] + 1.0)))
        log_scaled.append(ls)
        print(f"fcn n={n}: scaled={row['scaled']:.6f} log_scaled={ls:.6f}"
              f"  [{time.perf_counter() - t0:.1f}s]")
    return {
        "c": FCN_C, "seed": FCN_SEED, "n_grid": FCN_N_GRID,
        "scaled": scaled,
        "scaled_lo": round(0.8 * min(scaled), 9),
        "scaled_hi": round(1.25 * max(scaled), 9),
        "log_scaled": log_scaled,
        "log_scaled_lo": round(0.8 * min(log_scaled), 9),
        "log_scaled_hi": round(1.25 * max(log_scaled), 9),
    }


def freeze_eta() -> dict:
    sup = eta_modulus_sup(20)
    limit = math.exp(2.0) / 2.0
    print(f"eta: sup_n20={sup!r} limit={limit!r}")
    return {"sup_n20": sup + 1e-12, "limit": limit}


def main() -> None:
    doc = {
        "version": "1",
        "eta": freeze_eta(),
        "pb_car": freeze_pb_car(),
        "scan": freeze_scan(),
        "fcn": freeze_fcn(),
    }
    OUT.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
