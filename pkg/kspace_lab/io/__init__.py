# File formats: tensor container, checkpoints, run configuration, PNG export
