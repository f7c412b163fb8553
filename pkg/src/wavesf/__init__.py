"""wavesf: wavelet spatial-frequency image classifier on a CPU autodiff engine."""

from .tensor import Parameter, Tensor, no_grad

__version__ = "0.1.0"

__all__ = ["Tensor", "Parameter", "no_grad", "__version__"]
