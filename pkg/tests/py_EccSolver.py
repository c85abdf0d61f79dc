import numpy as np

import py_DensityMap as pdm


def to_template(x, state):
    """`R(theta)^T (x - x_F)` for a single point"""
    c = np.cos(state[2])
    s = np.sin(state[2])
    dx = x[0] - state[0]
    dy = x[1] - state[1]
    return np.array([c * dx + s * dy, -s * dx + c * dy])


def jacobian(template_values, center, active, state):
    """Row by row Jacobian of the warped template"""
    radius = template_values.shape[0] // 2
    grad_x, grad_y = pdm.gradient(template_values)
    gx_map = pdm.DensityMap(radius)
    gx_map.values[:] = grad_x
    gy_map = pdm.DensityMap(radius)
    gy_map.values[:] = grad_y

    c = np.cos(state[2])
    s = np.sin(state[2])
    size = 2 * radius + 1
    rows = np.zeros((size * size, 3))
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            row = (dy + radius) * size + dx + radius
            if not active[row]:
                continue
            n = (center[0] + dx, center[1] + dy)
            xp = to_template(n, state)
            g = np.array([gx_map.sample(xp), gy_map.sample(xp)])
            d0 = n[0] - state[0]
            d1 = n[1] - state[1]
            warp = np.array(
                [
                    [-c, -s, -s * d0 + c * d1],
                    [s, -c, -c * d0 - s * d1],
                ]
            )
            rows[row] = g @ warp
    return rows


def closed_form_step(J, t, m_hat):
    """Linearised ECC minimiser through dense solves"""
    C = J.T @ J
    p_t = J.T @ t
    p_m = J.T @ m_hat
    x_t = np.linalg.solve(C, p_t)
    lam = (t @ t - p_t @ x_t) / (t @ m_hat - p_m @ x_t)
    return np.linalg.solve(C, lam * p_m - p_t), lam
