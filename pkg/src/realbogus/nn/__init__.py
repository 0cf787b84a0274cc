from realbogus.nn.network import (
    LayerSpec,
    Network,
    build_architecture,
    build_dia_architecture,
    build_nodia_architecture,
    parameter_count,
    predict,
)
from realbogus.nn.ops import (
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    dropout,
    maxpool_backward,
    maxpool_forward,
    relu,
    relu_backward,
    sgd_step,
    softmax,
    sparse_categorical_crossentropy,
)
