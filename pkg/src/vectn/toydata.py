"""Deterministic synthetic dataset generator for desk-scale runs.

Builds a linearly separable corpus: every example's image carries one
annotated face whose expression matches the example's sentiment label, so
a model that reads the refined face description can classify perfectly.
Captions, targets, and scene captions are drawn from fixed word pools and
carry no label information.

Run ``python -m vectn.toydata OUTDIR`` to materialize a ready-to-use
dataset directory (train/valid/test jsonl files plus sidecar-annotated
image references under ``images/``).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import Example, Label, save_split

_NAMES = (
    "Lydia", "Justin", "Randy", "Marta", "Imani", "Kenji", "Priya", "Diego",
    "Aisha", "Viktor", "Nora", "Tomás", "Yuki", "Omar", "Greta", "Basil",
)
_FILLER = (
    "today", "downtown", "again", "outside", "concert", "stadium", "friends",
    "weekend", "morning", "crowd", "photo", "moment", "street", "festival",
    "team", "coffee", "park", "game", "smiles", "lights",
)
_SCENES = (
    "two players on a court",
    "a crowded city square at dusk",
    "people gathered around a table",
    "a stage under bright lights",
    "a quiet park bench by the river",
    "fans lining a stadium entrance",
)
_GENDERS = ("man", "woman")
_RACES = ("Indian", "Black", "Asian", "White", "Latino", "Middle Eastern")
_LABELS = (Label.NEGATIVE, Label.NEUTRAL, Label.POSITIVE)


def build_separable_fixture(
    out_dir: str | Path,
    n_train: int = 300,
    n_valid: int = 45,
    n_test: int = 90,
    seed: int = 1234,
) -> dict[str, list[Example]]:
    """Write the synthetic dataset and return its splits.

    Layout: ``examples_train.jsonl``, ``examples_valid.jsonl``,
    ``examples_test.jsonl``, plus ``images/img_*.png.json`` sidecars.
    """
    out_dir = Path(out_dir)
    images = out_dir / "images"
    images.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    splits: dict[str, list[Example]] = {}
    counter = 0
    for split_name, count in (("train", n_train), ("valid", n_valid), ("test", n_test)):
        examples: list[Example] = []
        for i in range(count):
            label = _LABELS[i % 3]
            target = str(rng.choice(_NAMES))
            words = list(rng.choice(_FILLER, size=int(rng.integers(4, 8)), replace=False))
            insert_at = int(rng.integers(0, len(words) + 1))
            words.insert(insert_at, target)
            caption = " ".join(words)
            image_rel = f"images/img_{counter:05d}.png"
            sidecar = {
                "id": f"{split_name}-{i:05d}",
                "size": [256, 256],
                "faces": [
                    {
                        "bbox": [int(rng.integers(0, 128)), int(rng.integers(0, 128)), 64, 64],
                        "attributes": {
                            "age": int(rng.integers(18, 70)),
                            "gender": str(rng.choice(_GENDERS)),
                            "race": str(rng.choice(_RACES)),
                            "sentiment": label.value,
                        },
                        "confidence": {
                            "race": round(float(rng.uniform(0.6, 0.99)), 4),
                            "sentiment": round(float(rng.uniform(0.75, 0.99)), 4),
                        },
                    }
                ],
                "scene_caption": str(rng.choice(_SCENES)),
            }
            (out_dir / (image_rel + ".json")).write_text(
                json.dumps(sidecar, sort_keys=True), encoding="utf-8"
            )
            examples.append(
                Example(
                    id=sidecar["id"],
                    image_ref=image_rel,
                    caption=caption,
                    target=target,
                    label=label,
                )
            )
            counter += 1
        save_split(examples, out_dir / f"examples_{split_name}.jsonl")
        splits[split_name] = examples
    return splits


def main(argv: list[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="generate the synthetic separable dataset")
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--train", type=int, default=300)
    parser.add_argument("--valid", type=int, default=45)
    parser.add_argument("--test", type=int, default=90)
    parser.add_argument("--seed", type=int, default=1234)
    args = parser.parse_args(argv)
    splits = build_separable_fixture(
        args.out_dir, n_train=args.train, n_valid=args.valid, n_test=args.test, seed=args.seed
    )
    for name, examples in splits.items():
        print(f"{name}: {len(examples)} examples")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
