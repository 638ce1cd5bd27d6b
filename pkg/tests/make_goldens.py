"""Regenerate the frozen geometry goldens.  Run only on a deliberate
geometry change, then review the diff: these files pin the dataset."""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from pulsenet.scenes import N_CLASSES, compose_scene, render_scene  # noqa: E402

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def main() -> None:
    os.makedirs(DATA_DIR, exist_ok=True)
    with open(os.path.join(DATA_DIR, "golden_templates.txt"), "w",
              encoding="ascii") as fh:
        for class_id in range(N_CLASSES):
            row = " ".join(f"{v:.17g}"
                           for v in compose_scene(class_id).delays.ravel())
            fh.write(row + "\n")
    with open(os.path.join(DATA_DIR, "golden_road_render.txt"), "w",
              encoding="ascii") as fh:
        row = " ".join(f"{v:.17g}"
                       for v in render_scene(1, jitter_seed=0).delays.ravel())
        fh.write(row + "\n")
    print("goldens written to", DATA_DIR)


if __name__ == "__main__":
    main()
