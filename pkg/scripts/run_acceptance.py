"""Run the acceptance criteria and print one line per criterion.

    python3 scripts/run_acceptance.py [criterion numbers ...]

Exit status 0 iff every selected criterion passes.
"""

import sys

from genfilippov.acceptance import run_all


def main():
    only = [int(a) for a in sys.argv[1:]] or None
    results = run_all(only)
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed, {sum(r.seconds for r in results):.1f} s")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
