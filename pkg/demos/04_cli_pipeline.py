"""The full pipeline through the command-line interface.

Every stage reads the previous stage's files, and every stage is a pure
function of its inputs and --seed: run this script twice and the output
trees are byte-identical. The same commands work on any dataset that
follows the manifest format, not just generated ones.
"""

import pathlib

from physgrd.cli import main

root = pathlib.Path("demo_output")
data = root / "data"

steps = [
    # a tiny two-subject cohort of hops and walks
    ["gen", "--kind", "hop,walk", "--subjects", "2", "--duration", "2.0",
     "--seed", "42", "--out-dir", str(data)],
    # pick controller gains on that cohort (singleton cell keeps it quick;
    # drop --kp/--kd to sweep the full default grid)
    ["calibrate", "--manifest", str(data / "manifest.json"),
     "--kp", "70", "--kd", "3", "--out-dir", str(root / "calib")],
    # export the tracked trajectories for inspection
    ["simulate", "--manifest", str(data / "manifest.json"),
     "--gains", str(root / "calib" / "best_gains.json"),
     "--out-dir", str(root / "sim")],
    # train a small predictor, holding subject S2 out
    ["train", "--manifest", str(data / "manifest.json"), "--test-subject", "S2",
     "--gains", str(root / "calib" / "best_gains.json"),
     "--epochs", "5", "--batch-size", "8", "--learning-rate", "1e-3",
     "--window-len", "100", "--conv-channels", "12,12,12,12",
     "--fc-widths", "12,8", "--out-dir", str(root / "train")],
    # run it over the held-out subject and score the predictions
    ["predict", "--manifest", str(data / "manifest.json"),
     "--checkpoint", str(root / "train" / "checkpoint.json"),
     "--subject", "S2", "--out-dir", str(root / "pred")],
    ["metrics", "--manifest", str(data / "manifest.json"),
     "--pred-dir", str(root / "pred"), "--subject", "S2",
     "--out-dir", str(root / "metrics")],
    # overlay plate, physics and predicted forces for one clip
    ["plot", "--clip", str(data / "S2_hop_000_clip.csv"),
     "--plate", str(data / "S2_hop_000_plate.csv"),
     "--pred", str(root / "pred" / "S2_hop_000_pred.csv"),
     "--gains", str(root / "calib" / "best_gains.json"),
     "--out-dir", str(root / "plots")],
]

for argv in steps:
    print(f"\n$ physgrd {' '.join(argv)}")
    code = main(argv)
    assert code == 0, f"step {argv[0]} exited {code}"

print("\nall artifacts under demo_output/; open plots/force.svg for the overlay")
