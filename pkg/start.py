"""
gES Benchmark: graphical Exponential Screening

Main entry point; the same CLI is installed as `ges-bench`.

Usage:
    python start.py benchmark --model AR --n 200 --p 50 --reps 20
    python start.py simulate --model Hub --n 400 --p 100 --out results/hub
    python start.py ingest --input raw.csv --out scored.csv --transform normal_score

Prerequisites:
    1. (Optional) Copy .env.example to .env to change output dir, jobs, seed
    2. (Optional) Set LANGSMITH_API_KEY and LANGSMITH_TRACING=true for tracing
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
