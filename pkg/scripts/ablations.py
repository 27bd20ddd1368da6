"""Objective ablations on tasks 1 and 15: QA, QA+AE, QA+AE+ST.

Usage: python scripts/ablations.py [--tasks 1,15]
Each variant reports its best-seed test accuracy; the expected ordering
is QA < QA+AE <= QA+AE+ST.
"""

import argparse
import sys

from ngm.presets import ablation_recipe, run_recipe

VARIANTS = ("qa", "qa_ae", "qa_ae_st")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--tasks", default="1,15")
    args = parser.parse_args()
    tasks = [int(t) for t in args.tasks.split(",") if t.strip()]

    def progress(task, outcome):
        print(f"#   seed {outcome.seed}: acc={outcome.test_accuracy:.3f} "
              f"({outcome.seconds:.0f}s)", file=sys.stderr)

    print("task\tvariant\tbest_seed\ttest_acc")
    for task in tasks:
        scores = {}
        for variant in VARIANTS:
            recipe = ablation_recipe(task, variant)
            print(f"# task {task} variant {variant}", file=sys.stderr)
            result = run_recipe(recipe, progress=progress)
            scores[variant] = result.best.test_accuracy
            print(f"{task}\t{variant}\t{result.best.seed}"
                  f"\t{result.best.test_accuracy:.4f}")
        ordered = scores["qa"] < scores["qa_ae"] <= scores["qa_ae_st"]
        print(f"# task {task} ordering qa < qa_ae <= qa_ae_st: "
              f"{'holds' if ordered else 'VIOLATED'}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
