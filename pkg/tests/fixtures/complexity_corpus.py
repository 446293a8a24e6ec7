"""Ten functions with hand-counted cyclomatic complexity.

Each count was derived manually before any implementation existed:
1 + (if statements) + (conditional expressions) + (loops) +
(exception handler clauses) + (boolean operator occurrences) +
(comprehension filters). The comments on each entry show the tally.
"""

CORPUS: list[tuple[str, int]] = [
    # straight line: no decision points
    (
        '''\
def add_one(x):
    """Add one."""
    y = x + 1
    return y
''',
        1,
    ),
    # one if
    (
        '''\
def absolute(x):
    """Absolute value."""
    if x < 0:
        x = -x
    return x
''',
        2,
    ),
    # for + if
    (
        '''\
def count_positive(items):
    """Count positive values."""
    n = 0
    for v in items:
        if v > 0:
            n += 1
    return n
''',
        3,
    ),
    # for + if + elif
    (
        '''\
def capped_sum(xs):
    """Sum values, capping each at ten."""
    total = 0
    for x in xs:
        if x > 10:
            total += 10
        elif x > 0:
            total += x
        else:
            total += 0
    return total
''',
        4,
    ),
    # while + if + two handlers
    (
        '''\
def drain(queue):
    """Drain a queue into integers, tolerating junk."""
    out = []
    while queue:
        item = queue.pop()
        try:
            if item is None:
                continue
            out.append(int(item))
        except ValueError:
            out.append(0)
        except TypeError:
            out.append(-1)
    return out
''',
        5,
    ),
    # comprehension filter + for + two "and" + ternary
    (
        '''\
def tag_values(xs, lo, hi):
    """Filter values and tag them as in or out of range."""
    kept = [x for x in xs if lo <= x]
    out = []
    for x in kept:
        ok = x < hi and x != 0 and x > lo
        out.append("in" if ok else "out")
    return out
''',
        6,
    ),
    # two for + if + "or" + if + handler
    (
        '''\
def first_bad_row(grid):
    """Index of the first row containing an empty cell, else -1."""
    for row in grid:
        seen = 0
        for cell in row:
            if cell is None or cell == "":
                seen += 1
        if seen:
            try:
                return grid.index(row)
            except ValueError:
                return -1
    return -1
''',
        7,
    ),
    # comp filter + while + if + elif + comp filter + "or" + ternary
    (
        '''\
def tokenize(text, vocab):
    """Tokenize text against a vocabulary with lowercase fallback."""
    tokens = [t for t in text.split() if t]
    result = []
    i = 0
    while i < len(tokens):
        t = tokens[i]
        if t in vocab:
            result.append(t)
        elif t.lower() in vocab:
            result.append(t.lower())
        else:
            pieces = [p for p in t if p.isalpha()]
            result.append("".join(pieces) or "<unk>")
        i += 1 if t else 2
    return result
''',
        8,
    ),
    # single ternary
    (
        '''\
def sign_label(x):
    """Label the sign of a number."""
    return "neg" if x < 0 else "pos"
''',
        2,
    ),
    # if + one "and"
    (
        '''\
def bounded_product(a, b):
    """Product of two positives, else zero."""
    if a > 0 and b > 0:
        return a * b
    return 0
''',
        3,
    ),
]

# one loop over a keyword list plus one membership conditional: 1 + 1 + 1
KEYWORD_COUNTER = '''\
def count_keyword_mentions(slide_text):
    """Count keywords mentioned in the provided slide text."""
    keywords = ["granite", "basalt", "quartzite", "pumice stone"]
    count = 0
    for keyword in keywords:
        if keyword in slide_text:
            count += 1
    return count
'''
KEYWORD_COUNTER_COMPLEXITY = 3

CORPUS_MEAN = sum(expected for _, expected in CORPUS) / len(CORPUS)  # 4.1 by hand
