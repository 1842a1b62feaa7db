"""Write a small offline demo dataset in the humaneval record shape.

    python3 scripts/make_demo_dataset.py --out demo/problems.jsonl [-n 6]

Handy for exercising `codeloop run` against a cheap model, or the resume
and scoring paths without burning tokens on a full benchmark.
"""
import argparse
import json
from pathlib import Path

PROBLEMS = [
    {
        "task_id": "demo/reverse-words",
        "entry_point": "reverse_words",
        "prompt": (
            "def reverse_words(s):\n"
            '    """Return the words of s in reverse order, joined by single spaces.\n\n'
            "    reverse_words('the quick fox') => 'fox quick the'\n"
            "    reverse_words('one') => 'one'\n"
            '    """\n'
        ),
        "test": (
            "def check(candidate):\n"
            "    assert candidate('the quick fox') == 'fox quick the'\n"
            "    assert candidate('a b c d') == 'd c b a'\n"
            "    assert candidate('') == ''\n"
        ),
    },
    {
        "task_id": "demo/sum-of-evens",
        "entry_point": "sum_of_evens",
        "prompt": (
            "def sum_of_evens(numbers):\n"
            '    """Return the sum of the even numbers in the list.\n\n'
            "    sum_of_evens([1, 2, 3, 4]) => 6\n"
            "    sum_of_evens([1, 3, 5]) => 0\n"
            '    """\n'
        ),
        "test": (
            "def check(candidate):\n"
            "    assert candidate([1, 2, 3, 4]) == 6\n"
            "    assert candidate([]) == 0\n"
            "    assert candidate([-2, 2]) == 0\n"
        ),
    },
    {
        "task_id": "demo/digit-sum",
        "entry_point": "digit_sum",
        "prompt": (
            "def digit_sum(n):\n"
            '    """Return the sum of the decimal digits of a non-negative integer.\n\n'
            "    digit_sum(123) => 6\n"
            "    digit_sum(0) => 0\n"
            '    """\n'
        ),
        "test": (
            "def check(candidate):\n"
            "    assert candidate(123) == 6\n"
            "    assert candidate(999) == 27\n"
            "    assert candidate(0) == 0\n"
        ),
    },
    {
        "task_id": "demo/run-length",
        "entry_point": "run_length",
        "prompt": (
            "def run_length(s):\n"
            '    """Encode s as (char, count) pairs for each run of equal characters.\n\n'
            "    run_length('aaabcc') => [('a', 3), ('b', 1), ('c', 2)]\n"
            "    run_length('') => []\n"
            '    """\n'
        ),
        "test": (
            "def check(candidate):\n"
            "    assert candidate('aaabcc') == [('a', 3), ('b', 1), ('c', 2)]\n"
            "    assert candidate('x') == [('x', 1)]\n"
            "    assert candidate('') == []\n"
        ),
    },
    {
        "task_id": "demo/second-largest",
        "entry_point": "second_largest",
        "prompt": (
            "def second_largest(numbers):\n"
            '    """Return the second largest distinct value, or None if there is none.\n\n'
            "    second_largest([3, 1, 4, 1, 5]) => 4\n"
            "    second_largest([7, 7]) => None\n"
            '    """\n'
        ),
        "test": (
            "def check(candidate):\n"
            "    assert candidate([3, 1, 4, 1, 5]) == 4\n"
            "    assert candidate([7, 7]) is None\n"
            "    assert candidate([2, 9]) == 2\n"
        ),
    },
    {
        "task_id": "demo/balanced-brackets",
        "entry_point": "balanced",
        "prompt": (
            "def balanced(s):\n"
            '    """Return True when every ( and ) in s is properly matched.\n\n'
            "    balanced('(())') => True\n"
            "    balanced(')(') => False\n"
            '    """\n'
        ),
        "test": (
            "def check(candidate):\n"
            "    assert candidate('(())') is True\n"
            "    assert candidate(')(') is False\n"
            "    assert candidate('') is True\n"
        ),
    },
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--out", required=True, help="output JSONL path")
    parser.add_argument("-n", type=int, default=len(PROBLEMS), help="number of problems")
    args = parser.parse_args()

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    chosen = PROBLEMS[: max(1, min(args.n, len(PROBLEMS)))]
    out.write_text("".join(json.dumps(r) + "\n" for r in chosen), "utf-8")
    print(f"wrote {len(chosen)} problems to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
