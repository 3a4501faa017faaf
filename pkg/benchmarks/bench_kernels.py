"""Time the numba and numpy resampling kernels on a synthetic panel.

    python3 benchmarks/bench_kernels.py [--edges 200000] [--rows 20000] [--repeat 20]

Then time a full null-plus-bootstrap run under each backend, using
subprocesses because the backend is fixed at import.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from citebalance import _kernels


def kernel_inputs(n_edges: int, n_rows: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    n_papers = n_rows * 2
    probs = rng.dirichlet(np.ones(4), n_papers)
    return {
        "cum": np.cumsum(probs, axis=1),
        "u": rng.random(n_papers),
        "edge_row": np.sort(rng.integers(0, n_rows, n_edges)),
        "edge_cited": rng.integers(0, n_papers, n_edges),
        "edge_probs": probs[rng.integers(0, n_papers, n_edges)],
        "values": rng.random((n_rows, 8)),
        "idx": rng.integers(0, n_rows, n_rows),
        "row_group": rng.integers(0, 4, n_rows),
        "resid": rng.normal(size=n_edges),
        "weights": rng.random(n_edges),
    }


def cases(impl, d, n_rows):
    return {
        "draw_categories": lambda: impl.draw_categories(d["cum"], d["u"]),
        "null_row_counts": lambda: impl.null_row_counts(d["cum"], d["u"], d["edge_row"], d["edge_cited"], n_rows),
        "row_prob_sums": lambda: impl.row_prob_sums(d["edge_row"], d["edge_probs"], n_rows),
        "group_totals": lambda: impl.group_totals(d["values"], d["idx"], d["row_group"], 4),
        "check_loss": lambda: impl.check_loss(d["resid"], d["weights"], 0.5),
    }


PIPELINE_SNIPPET = """
import time
from citebalance import _kernels, imbalance, pipeline, synth
from citebalance.corpus import write_corpus
c, _ = synth.generate(synth.SynthConfig(seed=0, refs_mean=6))
write_corpus(c, {path!r})
a = pipeline.run_stages(pipeline.RunConfig(corpus={path!r}), upto="imbalance")
keys = [imbalance.StatKey("delta_percent", g, "ALL") for g in ("MM", "WM", "MW", "WW")]
imbalance.infer_panel(a.panel, keys, B=10, R=10, seed=0)
t = time.perf_counter()
imbalance.infer_panel(a.panel, keys, B=1000, R=5000, seed=0)
print(_kernels.BACKEND, time.perf_counter() - t)
"""


def end_to_end(path: str) -> None:
    for disable in ("1", "0"):
        env = dict(os.environ, CITEBALANCE_DISABLE_NUMBA=disable)
        out = subprocess.run([sys.executable, "-c", PIPELINE_SNIPPET.format(path=path)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"infer_panel B=1000 R=5000  {out[0]:>6}: {float(out[1]):8.2f} s")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--edges", type=int, default=200_000)
    ap.add_argument("--rows", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-pipeline", action="store_true")
    args = ap.parse_args(argv)

    d = kernel_inputs(args.edges, args.rows)
    impls = [_kernels.numpy_impl] + ([_kernels.numba_impl] if _kernels.numba_impl is not None else [])
    timings = {}
    for impl in impls:
        for name, fn in cases(impl, d, args.rows).items():
            fn()  # compile / warm up
            timings[name, impl.name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    print(f"{'kernel':<18}" + "".join(f"{i.name:>12}" for i in impls) + ("     speedup" if len(impls) > 1 else ""))
    for name in cases(_kernels.numpy_impl, d, args.rows):
        row = [timings[name, i.name] * 1e3 for i in impls]
        line = f"{name:<18}" + "".join(f"{t:10.3f}ms" for t in row)
        if len(row) > 1:
            line += f"{row[0] / row[1]:11.1f}x"
        print(line)
    if _kernels.numba_impl is None:
        print("numba not installed; only the numpy backend was timed")
    if not args.skip_pipeline:
        import tempfile
        with tempfile.TemporaryDirectory() as tmp:
            end_to_end(os.path.join(tmp, "bench.jsonl"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
