"""QCFS ANN-to-SNN conversion with offset-spike calibration."""

from .calibrate import (
    CalibConfig,
    CalibrationPlan,
    OffsetJudgment,
    Sign,
    calibrate_layer,
    calibrate_network,
    evaluate,
    judge_exact,
    judge_sign,
    lightweight_calibrate,
    shift_down_distance,
    shift_up_distance,
)
from .convert import SnnNetwork, convert, encode_input
from .diagnostics import OffsetReport, layer_distribution, offset_spike, ratio_mse_sweep
from .ifcore import (
    InputCurrents,
    LayerParams,
    LayerTrace,
    average_psp,
    conservation_check,
    if_step,
    run_layer,
)
from .qcfs import QcfsLayer, QcfsNetwork, ann_forward, qcfs_activation, train_toy

__version__ = "0.1.0"
