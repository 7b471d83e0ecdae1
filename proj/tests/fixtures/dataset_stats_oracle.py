"""Independent statistics over a supervision JSONL file.

Prints the values frozen in test_dataset.cpp. Tokens are whitespace-separated
words; tokens-per-step bins are 10 wide; value buckets are [0,.2) ... [.8,1].
"""
import json
import sys
from collections import Counter


def bucket(mu):
    return min(int(mu * 5), 4) if mu < 1.0 else 4


def main(path):
    rows = [json.loads(line) for line in open(path, encoding="utf-8") if line.strip()]
    steps = [len(r["prefix_steps"]) for r in rows]
    tokens = [sum(len(s.split()) for s in r["prefix_steps"]) for r in rows]
    step_hist = Counter(steps)
    tok_hist = Counter((t // s) // 10 * 10 if s else 0 for t, s in zip(tokens, steps))
    groups = {b: [r for r in rows if bucket(r["mu_hat"]) == b] for b in range(5)}
    problems = len({r["problem_id"] for r in rows})
    print("records", len(rows))
    print("problems", problems)
    print("mean_steps", repr(sum(steps) / len(rows)))
    print("mean_tokens_per_step", repr(sum(tokens) / sum(steps)))
    print("step_hist", sorted(step_hist.items()))
    print("token_hist", sorted(tok_hist.items()))
    for b, g in groups.items():
        if g:
            print("bucket", b, len(g), repr(sum(r["n_total"] for r in g) / len(g)),
                  repr(sum(r["search_depth"] for r in g) / len(g)), repr(len(g) / problems))
        else:
            print("bucket", b, 0)
    low, mid, high = groups[0], groups[2], groups[4]
    if mid and (low or high):
        ext = low + high
        ratio = (sum(r["n_total"] for r in mid) / len(mid)) / (sum(r["n_total"] for r in ext) / len(ext))
        print("ratio", repr(ratio))
    else:
        print("ratio none")


if __name__ == "__main__":
    main(sys.argv[1])
