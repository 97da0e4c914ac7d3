"""End to end: synthesize a dataset, localize against it, evaluate.

Writes a short noisy sequence to a temporary directory, runs the frame
chain (predict, select, extract, align, validate, commit), and compares
the estimated trajectory against ground truth.
"""

import tempfile
from pathlib import Path

from edgeloc import NoiseConfig, evaluate_trajectories, generate_scene, run_dataset, write_dataset
from edgeloc.pipeline import DatasetManifest


def main():
    noise = NoiseConfig(odometry_drift_per_m=0.005, edge_jitter_px=0.5, edge_dropout=0.05)
    scene = generate_scene(seed=12, preset="sparse", n_frames=25, noise=noise)

    with tempfile.TemporaryDirectory() as tmp:
        root = write_dataset(scene, Path(tmp) / "dataset")
        print(f"dataset: {sum(1 for _ in (root / 'frames').iterdir())} frames, "
              f"{len(scene.compact_map.landmarks)} landmarks, "
              f"drift {noise.odometry_drift_per_m * 100:.1f}%/m, "
              f"jitter {noise.edge_jitter_px} px")

        manifest = DatasetManifest.from_directory(root)
        trajectory, records = run_dataset(manifest)

        print("\nper-frame log:")
        for record in records:
            print(f"  {record.to_json()}")

        report = evaluate_trajectories(dict(trajectory), dict(scene.trajectory))
        print("\n" + report.to_text())


if __name__ == "__main__":
    main()
