"""Why the physics term earns its keep.

Force plates drop out, most often at the start of a trial before the
subject reaches the instrumented region. The predictor's plate loss term is
silent there, but the physics term (the PD reaction force computed from the
trajectory itself) covers every frame. This demo trains the temporal-conv
predictor twice on walks whose first 30% of plate data is missing, with and
without the physics weight, and scores the held-out subject by rolling the
predicted total force back into a trajectory.

Runs at desk scale (narrow channels, ~a minute of data); expect the
qualitative gap, not publication-grade numbers.
"""

from physgrd import TrainConfig, make_dataset, train
from physgrd.metrics import loso_splits

dataset = make_dataset(
    ["walk"], n_subjects=5, clips_per_subject=2, seed=11,
    base_params={"duration": 5.0, "missing_lead": 0.3},
)
train_subjects, test_subject = loso_splits(dataset.subjects())[-1]
print(f"training on {train_subjects}, holding out {test_subject}\n")

for lambda2 in (0.0, 0.005):
    cfg = TrainConfig(
        epochs=40, batch_size=16, learning_rate=1e-3, seed=0,
        lambda1=0.002, lambda2=lambda2, window_len=150,
        conv_channels=(16, 16, 16, 16), fc_widths=(16, 8),
    )
    net, log = train(dataset, cfg, (train_subjects, test_subject))
    last = log[-1]
    tag = "plate only     " if lambda2 == 0 else "plate + physics"
    print(
        f"{tag} (lambda2={lambda2}): "
        f"held-out vGRF MSE ({last.test_vgrf_l:.3f}, {last.test_vgrf_r:.3f}) BW^2, "
        f"held-out vRPE {last.test_vrpe:9.1f}"
    )

print(
    "\nThe rollout starts exactly where the plates are blind, so the"
    "\nphysics-supervised model reconstructs a far better trajectory."
)
