import torch
from torch.autograd import gradcheck
from torch.func import functional_call


def module_gradcheck(module, inputs, rtol=1e-4, atol=1e-6):
    """
    Finite-difference check of a module's gradients with respect to its inputs
    and all of its parameters, in float64.
    """
    module = module.double()
    names, params = [], []
    for name, param in module.named_parameters():
        names.append(name)
        params.append(param.detach().clone().requires_grad_(True))
    inputs = tuple(x.detach().double().requires_grad_(True) for x in inputs)
    n_inputs = len(inputs)

    def fn(*args):
        return functional_call(module, dict(zip(names, args[n_inputs:])), args[:n_inputs])

    return gradcheck(fn, inputs + tuple(params), eps=1e-6, atol=atol, rtol=rtol)


def function_gradcheck(fn, inputs, rtol=1e-4, atol=1e-6):
    inputs = tuple(x.detach().double().requires_grad_(True) for x in inputs)
    return gradcheck(fn, inputs, eps=1e-6, atol=atol, rtol=rtol)


def snapshot(module):
    return {name: tensor.detach().clone() for name, tensor in module.state_dict().items()}
