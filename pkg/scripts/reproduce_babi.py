"""Train each supported task with its recipe and report test accuracy.

Usage: python scripts/reproduce_babi.py [--tasks 1,2,11,15,16] [--all-seeds]
Emits one TSV row per task: task, best seed, test accuracy, threshold,
pass/fail, seconds.
"""

import argparse
import sys

from ngm.presets import RECIPES, run_recipe


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--tasks", default="1,2,11,15,16")
    parser.add_argument("--all-seeds", action="store_true",
                        help="run every seed instead of stopping at the bar")
    args = parser.parse_args()
    tasks = [int(t) for t in args.tasks.split(",") if t.strip()]

    def progress(task, outcome):
        print(f"# task {task} seed {outcome.seed}: "
              f"acc={outcome.test_accuracy:.3f} "
              f"({outcome.seconds:.0f}s)", file=sys.stderr)

    print("task\tseed\ttest_acc\tthreshold\tstatus\tseconds")
    failures = 0
    for task in tasks:
        result = run_recipe(RECIPES[task], progress=progress,
                            stop_at_threshold=not args.all_seeds)
        status = "pass" if result.passed else "FAIL"
        failures += 0 if result.passed else 1
        total = sum(o.seconds for o in result.outcomes)
        print(f"{task}\t{result.best.seed}\t{result.best.test_accuracy:.4f}"
              f"\t{result.threshold:.2f}\t{status}\t{total:.0f}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
