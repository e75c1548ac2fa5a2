"""Compiled kernels vs numpy fallback; prints one row per kernel and size.

    python3 benchmarks/bench_kernels.py --repeat 5
"""
import sys

from fusetrack.bench import main

if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
