from .sampling import SamplingMask
from .configs import NetConfig, TrainConfig
from .reports import LossReport, EpochRecord, MethodScore, EvalReport
from .run_config import RunConfig, SamplingSpec, DataPaths

__all__ = ['SamplingMask', 'NetConfig', 'TrainConfig', 'LossReport', 'EpochRecord',
           'MethodScore', 'EvalReport', 'RunConfig', 'SamplingSpec', 'DataPaths']
