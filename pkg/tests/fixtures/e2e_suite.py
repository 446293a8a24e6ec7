"""Hand-written scripted suites: tasks, transcripts, and oracle counts.

Three suites:

* ``E2E``: 12 tasks covering arithmetic, text extraction from attachments,
  error recovery, and multi-step function reuse (within one task and via
  retrieval across tasks).
* ``ABLATION``: 6 tasks, 4 of which need a novel function; two transcript
  variants, one for the full configuration and one for the no-generation
  configuration (define attempts followed by a wrong direct answer).
* ``TESTPHASE``: 3 tasks run against a frozen library; one retrieves a
  stored action, one defines a helper that must not be accumulated.

The accumulation oracle (which documented functions the train phase must
persist) was counted by hand from the transcripts below before any run:
sum_range, max_csv_score, factorial, normalize_text, word_lengths,
total_length, sum_csv_column. The undocumented pow2 is executed but never
accumulated.
"""

from __future__ import annotations

import json
from pathlib import Path

ATTACHMENTS = {
    "note.txt": "The launch code hides in plain sight: the magic word is plover.\n",
    "stats.csv": "name,score\napple,3\nbanana,7\ncherry,5\n",
    "stats2.csv": "name,score\nalpha,2\nbeta,4\ngamma,6\n",
}

EXPECTED_GENERATED = {
    "sum_range",
    "max_csv_score",
    "factorial",
    "normalize_text",
    "word_lengths",
    "total_length",
    "sum_csv_column",
}


def _response(thought: str, code: str | None) -> str:
    if code is None:
        return thought
    return f"{thought}\n```python\n{code}\n```"


E2E_TASKS = [
    {"task_id": "t01_arith", "question": "What is 6 times 7?", "expected_answer": "42"},
    {
        "task_id": "t02_sum_range",
        "question": "What is the sum of the integers from 1 to 100 inclusive?",
        "expected_answer": "5050",
    },
    {
        "task_id": "t03_magic_word",
        "question": "What is the magic word mentioned in the attached file?",
        "attachments": ["attachments/note.txt"],
        "expected_answer": "plover",
    },
    {
        "task_id": "t04_max_score",
        "question": "What is the highest score in the attached CSV file?",
        "attachments": ["attachments/stats.csv"],
        "expected_answer": "7",
    },
    {
        "task_id": "t05_binomial",
        "question": "How many ways are there to choose 2 items out of 12? Give the integer.",
        "expected_answer": "66",
    },
    {
        "task_id": "t06_normalize",
        "question": "Lowercase ' Crimson  SKY ' and collapse its whitespace; submit the result.",
        "expected_answer": "crimson sky",
    },
    {
        "task_id": "t07_reuse",
        "question": (
            "A text normalizer was saved to the action library earlier. Retrieve it "
            "and use it to normalize '  GREEN   hills  '."
        ),
        "expected_answer": "green hills",
    },
    {"task_id": "t08_division", "question": "What is 100 divided by 8?", "expected_answer": "12.5"},
    {"task_id": "t09_parse_recovery", "question": "What is 3 + 4?", "expected_answer": "7"},
    {
        "task_id": "t10_word_lengths",
        "question": "What is the total number of letters across the words in 'alpha beta gamma'?",
        "expected_answer": "14",
    },
    {
        "task_id": "t11_sum_scores",
        "question": "What is the sum of the score column in the attached CSV file?",
        "attachments": ["attachments/stats2.csv"],
        "expected_answer": "12",
    },
    {"task_id": "t12_power", "question": "What is 2 to the power of 10?", "expected_answer": "1024"},
]

_SUM_RANGE_DEF = '''\
def sum_range(n):
    """Sum the integers from 1 to n inclusive."""
    total = 0
    for i in range(1, n + 1):
        total += i
    return total

print(sum_range(100))'''

_MAX_CSV_DEF = '''\
def max_csv_score(path):
    """Return the maximum value of the score column in a CSV file."""
    import csv
    best = None
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            value = int(row["score"])
            if best is None or value > best:
                best = value
    return best

print(max_csv_score(TASK_ATTACHMENTS[0]))'''

_FACTORIAL_DEF = '''\
def factorial(n):
    """Product of the integers from 1 to n."""
    result = 1
    for i in range(2, n + 1):
        result *= i
    return result

print(factorial(5))'''

_NORMALIZE_DEF = '''\
def normalize_text(value):
    """Lowercase a string and collapse runs of whitespace into single spaces."""
    return " ".join(value.lower().split())

print(normalize_text(" Crimson  SKY "))'''

_WORDS_DEF = '''\
def word_lengths(sentence):
    """Lengths of the whitespace-separated words in a sentence."""
    return [len(word) for word in sentence.split()]

def total_length(sentence):
    """Total number of letters across the words of a sentence."""
    return sum(word_lengths(sentence))

print(total_length("alpha beta gamma"))'''

_SUM_CSV_DEF = '''\
def sum_csv_column(path, column="score"):
    """Sum an integer column of a CSV file."""
    import csv
    total = 0
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            total += int(row[column])
    return total

print(sum_csv_column(TASK_ATTACHMENTS[0]))'''

_POW2_DEF = '''\
def pow2(n):
    return 2 ** n

print(pow2(10))'''

E2E_TRANSCRIPT = [
    ("t01_arith", 1, "Multiply directly and submit the result.", "submit_final_answer(6 * 7)"),
    ("t02_sum_range", 1, "I will define a documented helper and check it on the input.", _SUM_RANGE_DEF),
    ("t02_sum_range", 2, "The helper works, so I submit its value.", "submit_final_answer(sum_range(100))"),
    ("t03_magic_word", 1, "First inspect the attached file.", "print(inspect_file_as_text(TASK_ATTACHMENTS[0]))"),
    ("t03_magic_word", 2, "The file names the magic word directly.", 'submit_final_answer("plover")'),
    ("t04_max_score", 1, "I will write a documented CSV helper and run it on the attachment.", _MAX_CSV_DEF),
    ("t04_max_score", 2, "The maximum score is printed, submit it.", "submit_final_answer(max_csv_score(TASK_ATTACHMENTS[0]))"),
    ("t05_binomial", 1, "Define a factorial helper and sanity-check it.", _FACTORIAL_DEF),
    ("t05_binomial", 2, "Now compute 12 choose 2 from factorials.", "print(factorial(12) // (factorial(10) * factorial(2)))"),
    ("t05_binomial", 3, "66 is the count, submit it.", "submit_final_answer(factorial(12) // (factorial(10) * factorial(2)))"),
    ("t06_normalize", 1, "Define a documented normalizer and try it.", _NORMALIZE_DEF),
    ("t06_normalize", 2, "Submit the normalized text.", 'submit_final_answer(normalize_text(" Crimson  SKY "))'),
    ("t07_reuse", 1, "Search the action library for the stored normalizer.", 'print(get_relevant_actions("lowercase a string and collapse whitespace"))'),
    ("t07_reuse", 2, "The normalizer is loaded now; run it on the new input.", 'print(normalize_text("  GREEN   hills  "))'),
    ("t07_reuse", 3, "Submit the normalized text.", 'submit_final_answer(normalize_text("  GREEN   hills  "))'),
    ("t08_division", 1, "Compute the division.", "print(100 / 0)"),
    ("t08_division", 2, "I divided by zero by mistake; use the right divisor.", "print(100 / 8)"),
    ("t08_division", 3, "Submit the quotient.", "submit_final_answer(100 / 8)"),
    ("t09_parse_recovery", 1, "Let me think about what three plus four equals before writing any code.", None),
    ("t09_parse_recovery", 2, "Now I answer with a proper code block.", "submit_final_answer(3 + 4)"),
    ("t10_word_lengths", 1, "Define two documented helpers: per-word lengths and their total.", _WORDS_DEF),
    ("t10_word_lengths", 2, "Fourteen letters in total, submit it.", 'submit_final_answer(total_length("alpha beta gamma"))'),
    ("t11_sum_scores", 1, "Define a documented column summer and run it on the attachment.", _SUM_CSV_DEF),
    ("t11_sum_scores", 2, "Submit the column total.", "submit_final_answer(sum_csv_column(TASK_ATTACHMENTS[0]))"),
    ("t12_power", 1, "A quick throwaway helper is enough here.", _POW2_DEF),
    ("t12_power", 2, "Submit the power.", "submit_final_answer(pow2(10))"),
]


# -- ablation suite ---------------------------------------------------------

ABLATION_TASKS = [
    {"task_id": "a1_capital", "question": "What is the capital of France?", "expected_answer": "Paris"},
    {"task_id": "a2_echo", "question": "Reply with exactly the word stone.", "expected_answer": "stone"},
    {
        "task_id": "a3_double",
        "question": "What is 21 doubled? Define a helper to compute it.",
        "expected_answer": "42",
    },
    {"task_id": "a4_reverse", "question": "Reverse the string 'word'.", "expected_answer": "drow"},
    {
        "task_id": "a5_letters",
        "question": "How many times does the letter a appear in 'banana'?",
        "expected_answer": "3",
    },
    {
        "task_id": "a6_squares",
        "question": "What is the sum of the squares of the integers 1 through 10?",
        "expected_answer": "385",
    },
]

# Task ids that cannot be solved without defining a new function.
ABLATION_NOVEL = {"a3_double", "a4_reverse", "a5_letters", "a6_squares"}

_DOUBLE_DEF = '''\
def double(n):
    """Double a number."""
    return 2 * n

print(double(21))'''

_REVERSE_DEF = '''\
def reverse_text(value):
    """Reverse the characters of a string."""
    return value[::-1]

print(reverse_text("word"))'''

_COUNT_LETTER_DEF = '''\
def count_letter(text, letter):
    """Count occurrences of a letter in a text."""
    total = 0
    for ch in text:
        if ch == letter:
            total += 1
    return total

print(count_letter("banana", "a"))'''

_SUM_SQUARES_DEF = '''\
def sum_squares(n):
    """Sum of the squares of the integers 1 through n."""
    return sum(i * i for i in range(1, n + 1))

print(sum_squares(10))'''

ABLATION_TRANSCRIPT_FULL = [
    ("a1_capital", 1, "I know this; submit directly.", 'submit_final_answer("Paris")'),
    ("a2_echo", 1, "Echo the requested word.", 'submit_final_answer("stone")'),
    ("a3_double", 1, "Define the requested helper and check it.", _DOUBLE_DEF),
    ("a3_double", 2, "Submit the doubled value.", "submit_final_answer(double(21))"),
    ("a4_reverse", 1, "Define a reversal helper.", _REVERSE_DEF),
    ("a4_reverse", 2, "Submit the reversed string.", 'submit_final_answer(reverse_text("word"))'),
    ("a5_letters", 1, "Define a counting helper.", _COUNT_LETTER_DEF),
    ("a5_letters", 2, "Submit the count.", 'submit_final_answer(count_letter("banana", "a"))'),
    ("a6_squares", 1, "Define a square-sum helper.", _SUM_SQUARES_DEF),
    ("a6_squares", 2, "Submit the total.", "submit_final_answer(sum_squares(10))"),
]

ABLATION_TRANSCRIPT_NOAI = [
    ("a1_capital", 1, "I know this; submit directly.", 'submit_final_answer("Paris")'),
    ("a2_echo", 1, "Echo the requested word.", 'submit_final_answer("stone")'),
    ("a3_double", 1, "Define the requested helper and check it.", _DOUBLE_DEF),
    ("a3_double", 2, "I cannot implement actions here; I have to guess.", 'submit_final_answer("cannot compute")'),
    ("a4_reverse", 1, "Define a reversal helper.", _REVERSE_DEF),
    ("a4_reverse", 2, "I cannot implement actions here; I have to guess.", 'submit_final_answer("cannot compute")'),
    ("a5_letters", 1, "Define a counting helper.", _COUNT_LETTER_DEF),
    ("a5_letters", 2, "I cannot implement actions here; I have to guess.", 'submit_final_answer("cannot compute")'),
    ("a6_squares", 1, "Define a square-sum helper.", _SUM_SQUARES_DEF),
    ("a6_squares", 2, "I cannot implement actions here; I have to guess.", 'submit_final_answer("cannot compute")'),
]


# -- frozen-library test-phase suite ----------------------------------------

TESTPHASE_TASKS = [
    {"task_id": "s01_arith", "question": "What is 9 times 9?", "expected_answer": "81"},
    {
        "task_id": "s02_reuse",
        "question": "Normalize the string '  MANY   spaces ' using the stored text normalizer.",
        "expected_answer": "many spaces",
    },
    {
        "task_id": "s03_square",
        "question": "What is 15 squared? Define a helper to compute it.",
        "expected_answer": "225",
    },
]

_SQUARE_DEF = '''\
def square(n):
    """Square a number."""
    return n * n

print(square(15))'''

TESTPHASE_TRANSCRIPT = [
    ("s01_arith", 1, "Multiply directly.", "submit_final_answer(9 * 9)"),
    ("s02_reuse", 1, "Retrieve the stored normalizer.", 'print(get_relevant_actions("lowercase a string and collapse whitespace"))'),
    ("s02_reuse", 2, "Normalize and submit.", 'submit_final_answer(normalize_text("  MANY   spaces "))'),
    ("s03_square", 1, "Define a square helper.", _SQUARE_DEF),
    ("s03_square", 2, "Submit the square.", "submit_final_answer(square(15))"),
]


# -- writers ------------------------------------------------------------------


def write_suite(
    target_dir: Path,
    tasks: list[dict],
    transcript: list[tuple],
    name: str = "suite",
) -> tuple[Path, Path]:
    """Write attachments, the task JSONL, and the transcript JSONL.

    Returns (dataset_path, transcript_path). Attachment paths in the task
    file stay relative; the dataset loader resolves them.
    """
    target_dir = Path(target_dir)
    attachments_dir = target_dir / "attachments"
    attachments_dir.mkdir(parents=True, exist_ok=True)
    for filename, content in ATTACHMENTS.items():
        (attachments_dir / filename).write_text(content, encoding="utf-8")

    dataset_path = target_dir / f"{name}_tasks.jsonl"
    with open(dataset_path, "w", encoding="utf-8") as fh:
        for task in tasks:
            fh.write(json.dumps(task, ensure_ascii=False, sort_keys=True) + "\n")

    transcript_path = target_dir / f"{name}_transcript.jsonl"
    with open(transcript_path, "w", encoding="utf-8") as fh:
        for task_id, step, thought, code in transcript:
            entry = {"task_id": task_id, "step": step, "response": _response(thought, code)}
            fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")

    return dataset_path, transcript_path
