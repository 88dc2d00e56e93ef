from neunets.tensor.autograd import DTYPE, NonFiniteError, ShapeError, TapeError, Tensor, as_tensor, backward, parameter
from neunets.tensor.init import he_normal, he_normal_init
from neunets.tensor.lstm import LSTMParams, lstm_forward, lstm_step
from neunets.tensor.ops import conv_forward, depthwise_conv_forward, separable_conv_forward
from neunets.tensor.optim import OptimizerConfig, OptimizerKind, make_optimizer
