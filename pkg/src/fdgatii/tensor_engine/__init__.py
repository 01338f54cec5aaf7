from .gradcheck import grad_check, grad_check_report, kink_margin, roundoff_floor, roundoff_noise
from .ops import (add, add_row, concat_cols, dropout, exp, gather_rows, leaky_relu, log_softmax_rows,
                  matmul, mul, nll_loss, relu, scale, segment_softmax, segment_weighted_sum, slice_rows,
                  spmm, sub, sum_all)
from .optim import Adam, ParamGroup
from .tensor import GradTape, Tensor, active_tape, no_tape

__all__ = [
    "Adam", "GradTape", "ParamGroup", "Tensor", "active_tape", "add", "add_row", "concat_cols",
    "dropout", "exp", "gather_rows", "grad_check", "grad_check_report", "kink_margin", "roundoff_floor", "roundoff_noise", "leaky_relu", "log_softmax_rows", "matmul", "mul",
    "nll_loss", "no_tape", "relu", "scale", "segment_softmax", "segment_weighted_sum", "slice_rows",
    "spmm", "sub", "sum_all",
]
