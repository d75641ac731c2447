"""Smoke and parity checks for the Python bindings.

Install the extension first, e.g. `pip install ./crates/py --no-build-isolation`,
and build the CLI with `cargo build`. Run from the repository root.
"""

import json
import math
import random
import subprocess
import sys
import tempfile
from pathlib import Path

import ssrkit_py as sk

ROOT = Path(__file__).resolve().parents[1]
FIX = ROOT / "crates/core/tests/fixtures"
CLI = ROOT / "target/debug/ssrkit"
PROMPT = "black metal floor lamp"


def cli_rewards(candidate_lines):
    with tempfile.NamedTemporaryFile("w", suffix=".jsonl", delete=False) as f:
        f.write("\n".join(candidate_lines) + "\n")
        path = f.name
    out = subprocess.run(
        [str(CLI), "reward", "--scene", str(FIX / "assets/reward_scene.json"), "--prompt", PROMPT,
         "--gt", str(FIX / "assets/gt.json"), "--embeddings", str(FIX / "assets/embeddings.tsv"), path],
        capture_output=True, text=True, check=True,
    )
    return [json.loads(line) for line in out.stdout.splitlines()]


def random_candidate(rng, gt):
    c = dict(gt)
    c["desc"] = rng.choice(["black metal floor lamp", "black metal table lamp", "slim black metal floor lamp",
                            "black metal floor lamp sculpture", "black lamp"])
    c["pos"] = [round(rng.uniform(-2.5, 2.5), 2), 0.0, round(rng.uniform(-2.5, 2.5), 2)]
    c["size"] = [round(s + rng.uniform(-0.15, 0.15), 3) for s in gt["size"]]
    if rng.random() < 0.05:
        return json.dumps(c)[: rng.randrange(1, 40)]
    return json.dumps(c)


def close(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return abs(a - b) <= 1e-12
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(close(a[k], b[k]) for k in a)
    return a == b


def main():
    assert sk.__version__ == subprocess.run([str(CLI), "--version"], capture_output=True, text=True).stdout.split()[-1]

    scene = (FIX / "assets/reward_scene.json").read_text()
    gt_text = (FIX / "assets/gt.json").read_text()
    emb = (FIX / "assets/embeddings.tsv").read_text()
    gt = json.loads(gt_text)

    rng = random.Random(0)
    cands = [random_candidate(rng, gt) for _ in range(1000)]
    bound = sk.score_candidates(cands, scene, PROMPT, gt_text, emb)
    via_cli = cli_rewards(cands)
    mismatches = [i for i, (a, b) in enumerate(zip(bound, via_cli)) if not close(a, b)]
    assert len(bound) == len(via_cli) == 1000 and not mismatches, mismatches[:5]
    assert sk.score_candidate("{broken", scene, PROMPT, gt_text, emb)["reward"] == -1.0

    assert sk.group_advantage([1.0, -1.0]) == [1.0, -1.0]
    assert sk.group_advantage([0.5, 0.5, 0.5]) == [0.0, 0.0, 0.0]
    for _ in range(1000):
        r = [rng.choice([-1.0, 0.0, 1.0]) for _ in range(rng.randrange(2, 9))]
        mean = sum(r) / len(r)
        std = math.sqrt(sum((x - mean) ** 2 for x in r) / len(r))
        want = [0.0] * len(r) if std < 1e-12 else [(x - mean) / std for x in r]
        assert all(abs(a - b) <= 1e-12 for a, b in zip(sk.group_advantage(r), want))

    assert abs(sk.pms("red velvet armchair", "blue fabric armchair") - 1 / 3) == 0.0
    assert sk.dss([1.0, 0.0], [0.0, 1.0]) == 0.0
    report = sk.compute_vbl((FIX / "scenes/overlap.json").read_text())
    assert report["mbl_voxels"] == 4000 and report["per_pair_mbl"] == {"0,1": 4000}
    delta = sk.delta_vbl((FIX / "scenes/overlap_before.json").read_text(), (FIX / "scenes/overlap.json").read_text())
    assert abs(delta - (1 / 3 - 0.25)) < 1e-12

    catalog = str(FIX / "assets/catalog.tsv")
    embeddings = str(FIX / "assets/embeddings.tsv")
    assert sk.greedy_asset(PROMPT, (0.4, 1.6, 0.4), catalog, embeddings) == "lamp-a"
    assert sk.sample_asset(PROMPT, (0.4, 1.6, 0.4), catalog, embeddings, seed=3) == sk.sample_asset(
        PROMPT, (0.4, 1.6, 0.4), catalog, embeddings, seed=3)

    try:
        sk.compute_vbl("{}")
    except sk.SceneParseError:
        pass
    else:
        raise AssertionError("expected SceneParseError")
    try:
        sk.score_candidate("{}", scene, PROMPT, gt_text, emb, {"no_such_key": 1.0})
    except sk.ConfigError:
        pass
    else:
        raise AssertionError("expected ConfigError")

    print("python bindings: all checks passed (1000 reward parity, 1000 advantage parity)")


if __name__ == "__main__":
    sys.exit(main())
