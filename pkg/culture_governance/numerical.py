import numpy as np


def _steps(x, rel_step):
    return rel_step * np.fmax(1.0, np.abs(x))


def central_gradient(f, x, rel_step=1e-4):
    x = np.asarray(x, dtype=float)
    steps = _steps(x, rel_step)
    grad = np.zeros(len(x))
    for i in range(len(x)):
        shift = np.zeros(len(x))
        shift[i] = steps[i]
        grad[i] = (f(x + shift) - f(x - shift)) / (2.0 * steps[i])
    return grad


def central_hessian(f, x, rel_step=1e-4):
    """
        central second differences with step rel_step * max(1, |x_i|)
        per coordinate; symmetric by construction
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    steps = _steps(x, rel_step)
    f0 = f(x)
    hessian = np.zeros([n, n])
    basis = np.eye(n) * steps

    for i in range(n):
        hessian[i, i] = (f(x + basis[i]) - 2.0 * f0 + f(x - basis[i])) / (steps[i] ** 2)
        for j in range(i):
            value = (f(x + basis[i] + basis[j]) - f(x + basis[i] - basis[j])
                     - f(x - basis[i] + basis[j]) + f(x - basis[i] - basis[j]))
            hessian[i, j] = hessian[j, i] = value / (4.0 * steps[i] * steps[j])
    return hessian
