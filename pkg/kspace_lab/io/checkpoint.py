import logging
import os
from typing import Dict, List

import numpy as np

from kspace_lab.io.container import load_container, save_container
from kspace_lab.models.configs import NetConfig
from kspace_lab.models.reports import EpochRecord
from kspace_lab.nn.rdunet import RDUNet
from kspace_lab.utils.validators import IoError, MissingModel

logger = logging.getLogger(__name__)

NETCONFIG_PREFIX = 'netconfig.'
NETCONFIG_FIELDS = ('depth', 'base_channels', 'polu_order', 'dense_skips')


def netconfig_entries(config: NetConfig) -> Dict[str, np.ndarray]:
    return {f"{NETCONFIG_PREFIX}{name}": np.array(float(getattr(config, name)))
            for name in NETCONFIG_FIELDS}


def netconfig_from_entries(entries: Dict[str, np.ndarray]) -> NetConfig:
    try:
        values = {name: float(entries[f"{NETCONFIG_PREFIX}{name}"]) for name in NETCONFIG_FIELDS}
    except KeyError as missing:
        raise IoError(f"Checkpoint has no network configuration entry {missing}") from None
    return NetConfig(
        depth=int(values['depth']),
        base_channels=int(values['base_channels']),
        polu_order=values['polu_order'],
        dense_skips=bool(values['dense_skips']),
    )


def save_checkpoint(path: str, net: RDUNet) -> str:
    """Parameters and running statistics, one entry each, plus the network configuration."""
    entries = dict(net.state_dict())
    entries.update(netconfig_entries(net.config))
    return save_container(path, entries)


def load_checkpoint(path: str, dtype=None) -> RDUNet:
    """Rebuild the network described by a checkpoint, in eval mode.

    Without `dtype` the precision of the stored weights is kept.
    """
    if not path or not os.path.exists(path):
        raise MissingModel(f"Checkpoint {path or '<none>'} does not exist")

    entries = load_container(path)
    config = netconfig_from_entries(entries)
    if dtype is None:
        first = next((value for name, value in entries.items() if not name.startswith(NETCONFIG_PREFIX)), None)
        dtype = first.dtype if first is not None else np.float32

    net = RDUNet(config, dtype=dtype)
    net.load_state_dict(entries)
    net.eval()
    logger.debug(f"Loaded checkpoint {path}: depth={config.depth}, base={config.base_channels}, "
                 f"{net.parameter_count()} parameters")
    return net


def history_entries(history: List[EpochRecord], iteration_losses: List[float]) -> Dict[str, np.ndarray]:
    """Per-epoch loss terms and per-iteration totals; missing validation scores are NaN."""
    def column(getter):
        return np.array([getter(record) for record in history], dtype=np.float64)

    return {
        'epoch.index': column(lambda r: r.epoch),
        'epoch.lr': column(lambda r: r.lr),
        'epoch.total': column(lambda r: r.train.total),
        'epoch.l2_term': column(lambda r: r.train.l2_term),
        'epoch.fourier_term': column(lambda r: r.train.fourier_term),
        'epoch.validation_total': column(lambda r: r.validation.total if r.validation else np.nan),
        'epoch.validation_mse': column(lambda r: np.nan if r.validation_mse is None else r.validation_mse),
        'iteration.total': np.asarray(iteration_losses, dtype=np.float64),
    }


def save_history(path: str, history: List[EpochRecord], iteration_losses: List[float]) -> str:
    return save_container(path, history_entries(history, iteration_losses))
