"""Regenerate the bundled reference retargeting weights.

Builds a synthetic supervision set by running the procedural motion
generator across the vocabulary and a style grid, labelling every frame
with the scripted reference pose map, then trains the retarget network and
freezes it under src/hiaer/data/weights/.  Rerun after changing the
curve table, the reference map, or the network/trainer.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from hiaer import planner as pl
from hiaer import retarget as rt
from hiaer.affect import StyleParams, Vocabulary
from hiaer.motion import encode_frame, stand_pose

WEIGHTS_PATH = Path(__file__).resolve().parent.parent / "src/hiaer/data/weights/reference_retarget.rtg1"

AMPLITUDES = (0.6, 1.0, 1.4)
TEMPOS = (0.75, 1.1)
OPENNESS = (-0.5, 0.0, 0.5)
WINDOWS_PER_COMBO = 5
STAND_EXTRA = 800
EPOCHS = 80
LEARNING_RATE = 0.01
SEED = 1234


class _Cmd:
    def __init__(self, primitive, style):
        self.primitive = primitive
        self.style = style


def build_dataset(desc: rt.RobotDescriptor):
    vocab = Vocabulary.default()
    cfg = pl.PlannerConfig()
    backend = pl.ProceduralBackend(vocab)
    frames = []
    for prim in vocab:
        for amp in AMPLITUDES:
            for tempo in TEMPOS:
                for op in OPENNESS:
                    state = pl.initialize(cfg, vocab)
                    state = pl.switch_primitive(
                        state, _Cmd(prim, StyleParams(amp, tempo, op))
                    )
                    for _ in range(WINDOWS_PER_COMBO):
                        frames.append(pl.step(state, backend, cfg))
    frames = np.vstack(frames)
    stand = encode_frame(stand_pose())
    frames = np.vstack([frames, np.tile(stand, (STAND_EXTRA, 1))])
    targets = np.stack([rt.reference_pose_map(f, desc) for f in frames])
    return frames, targets


def main() -> None:
    desc = rt.RobotDescriptor.default()
    t0 = time.time()
    frames, targets = build_dataset(desc)
    print(f"dataset: {frames.shape[0]} frames ({time.time() - t0:.1f}s)")

    pairs = [rt.TrainingPair(f, t) for f, t in zip(frames, targets)]
    t0 = time.time()
    net, losses = rt.train(pairs, epochs=EPOCHS, learning_rate=LEARNING_RATE, rng_seed=SEED)
    print(f"train: {EPOCHS} epochs in {time.time() - t0:.1f}s; "
          f"loss {losses[0]:.5f} -> {losses[-1]:.6f}")

    pred = rt.forward_raw(net, frames)
    per_joint_max = np.max(np.abs(pred - targets), axis=0)
    print(f"train-set max abs error: {per_joint_max.max():.4f} rad "
          f"(mean {np.mean(np.abs(pred - targets)):.5f})")

    stand_out = rt.forward(net, stand_pose(), desc)
    residual = float(np.max(np.abs(stand_out - desc.defaults)))
    print(f"stand residual: {residual:.5f} rad (bound 0.05)")
    if residual >= 0.04:
        raise SystemExit("stand residual too close to the bound; retune before freezing")

    WEIGHTS_PATH.parent.mkdir(parents=True, exist_ok=True)
    rt.save_weights(WEIGHTS_PATH, net)
    reloaded = rt.load_weights(WEIGHTS_PATH)
    stand_out2 = rt.forward(reloaded, stand_pose(), desc)
    residual2 = float(np.max(np.abs(stand_out2 - desc.defaults)))
    print(f"frozen f32 stand residual: {residual2:.5f} rad -> {WEIGHTS_PATH}")


if __name__ == "__main__":
    main()
