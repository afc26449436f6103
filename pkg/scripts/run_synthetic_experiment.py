#!/usr/bin/env python3
"""Multi-seed ranking experiment on the synthetic multispectral surrogate.

The dataset has 2 signal, 2 redundant, and 2 pure-noise channels; the check
of interest is whether the mixing layer pushes both noise channels to the
bottom two ranking positions.
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from dcmix import data as dp
from dcmix.models import build_model
from dcmix.network import NetworkConfig, StageConfig
from dcmix.train import TrainConfig, evaluate, train


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--samples", type=int, default=3000)
    parser.add_argument("--epochs", type=int, default=8)
    parser.add_argument("--lr", type=float, default=3e-3)
    parser.add_argument("--redundancy", type=float, default=0.5)
    parser.add_argument("--out", type=Path)
    args = parser.parse_args()

    dataset = dp.synth_multispectral(
        args.samples, signal_channels=2, noise_channels=2,
        redundancy=args.redundancy, seed=0, redundant_channels=2,
    )
    train_set, val_set, hold_set = dp.split(dataset, dp.SplitSpec(0.30, 0.20, seed=3))
    net_cfg = NetworkConfig(
        stages=(StageConfig(8, 3, 1), StageConfig(16, 3, 2), StageConfig(32, 3, 2)),
        class_count=4,
        input_size=16,
        input_channels=1,
    )

    rows = []
    for seed in range(args.seeds):
        model = build_model("dcmix", net_cfg, 6, seed=seed)
        train_cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                                seed=seed, patience=0)
        train(train_set, val_set, model, train_cfg)
        metrics = evaluate(model, hold_set)
        ranking = model.ranking()
        noise_last = set(ranking[-2:]) == {5, 6}
        rows.append({
            "seed": seed,
            "accuracy": metrics.accuracy,
            "ranking": ranking,
            "weights": [round(float(w), 4) for w in model.channel_weights()],
            "noise_ranked_last": noise_last,
        })
        print(f"seed {seed}: accuracy {metrics.accuracy:.4f} ranking {ranking} "
              f"noise last: {noise_last}")

    payload = {
        "runs": rows,
        "noise_last_rate": sum(r["noise_ranked_last"] for r in rows) / len(rows),
    }
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        args.out.write_text(text + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
