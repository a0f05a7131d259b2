"""Slow, loop-based reference implementations used as test oracles.

Each one is written from the definition, sharing no code with the package.
"""

import numpy as np


def degrade_oracle(img, psf, ratio, phase):
    """Direct periodic convolution, one output pixel at a time."""
    rows, cols = img.shape
    h = psf.shape[0] // 2
    out = np.zeros((rows // ratio, cols // ratio))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            y, x = ratio * i + phase, ratio * j + phase
            acc = 0.0
            for a in range(-h, h + 1):
                for b in range(-h, h + 1):
                    acc += psf[a + h, b + h] * img[(y - a) % rows, (x - b) % cols]
            out[i, j] = acc
    return out


def _keys(t):
    t = abs(t)
    if t <= 1:
        return 1.5 * t ** 3 - 2.5 * t ** 2 + 1
    if t < 2:
        return -0.5 * t ** 3 + 2.5 * t ** 2 - 4 * t + 2
    return 0.0


def _mirror(k, n):
    while k < 0 or k >= n:
        k = -k if k < 0 else 2 * (n - 1) - k
    return k


def upsample_oracle(low, ratio, offset):
    n_r, n_c = low.shape
    out = np.zeros((n_r * ratio, n_c * ratio))
    for y in range(out.shape[0]):
        py = (y - offset) / ratio
        for x in range(out.shape[1]):
            px = (x - offset) / ratio
            acc = 0.0
            for ky in range(int(np.floor(py)) - 1, int(np.floor(py)) + 3):
                for kx in range(int(np.floor(px)) - 1, int(np.floor(px)) + 3):
                    acc += _keys(py - ky) * _keys(px - kx) * low[_mirror(ky, n_r), _mirror(kx, n_c)]
            out[y, x] = acc
    return out


def gsa_oracle(hs, pan, psf, ratio, phase=0):
    """Seven explicit steps on plain arrays: hs (K, h, w), pan (H, W)."""
    k = hs.shape[0]
    pan_low = degrade_oracle(pan, psf, ratio, phase)
    design = np.column_stack([hs.reshape(k, -1).T, np.ones(hs[0].size)])
    w, *_ = np.linalg.lstsq(design, pan_low.ravel(), rcond=None)
    up = np.stack([upsample_oracle(b, ratio, phase) for b in hs])
    intensity = sum(w[i] * up[i] for i in range(k)) + w[k]
    matched = (pan - pan.mean()) * intensity.std() / pan.std() + intensity.mean()
    gains = np.array([np.mean((b - b.mean()) * (intensity - intensity.mean())) / intensity.var()
                      for b in up])
    fused = np.stack([up[i] + gains[i] * (matched - intensity) for i in range(k)])
    return fused, w, gains


def uiqi_oracle(a, b, window):
    """Mean over bands of the mean block index, blocks scanned one at a time."""
    per_band = []
    for band_a, band_b in zip(a, b):
        vals = []
        for r in range(0, band_a.shape[0] - window + 1, window):
            for c in range(0, band_a.shape[1] - window + 1, window):
                x = band_a[r:r + window, c:c + window].ravel()
                y = band_b[r:r + window, c:c + window].ravel()
                mx, my = x.mean(), y.mean()
                sxy = np.mean((x - mx) * (y - my))
                den = (x.var() + y.var()) * (mx ** 2 + my ** 2)
                if den >= 1e-12:
                    vals.append(4 * sxy * mx * my / den)
        per_band.append(np.mean(vals))
    return float(np.mean(per_band))


def d_s_oracle(fused, pan):
    """1 - R^2 from the normal equations of pan on [bands, 1]."""
    a = np.column_stack([fused.reshape(fused.shape[0], -1).T, np.ones(pan.size)])
    y = pan.ravel()
    coef = np.linalg.solve(a.T @ a, a.T @ y)
    res = y - a @ coef
    return float(res @ res / np.sum((y - y.mean()) ** 2))


def hysure_cvx_oracle(yh, ym, basis, response, psf, ratio, lambda_m, lambda_phi, phase=0):
    """Solve the HySure problem as a generic conic program with dense operators.

    yh (bands, h, w), ym (H, W); returns (optimal value, X of shape (p, H, W)).
    Differences are backward and periodic: (x D_h)[i, j] = x[i, j] - x[i, j - 1].
    """
    import cvxpy as cp

    rows, cols = ym.shape
    n = rows * cols
    eye = np.eye(n).reshape(n, rows, cols)
    h = psf.shape[0] // 2
    blur = np.zeros((n, rows, cols))
    for a in range(-h, h + 1):
        for b in range(-h, h + 1):
            blur += psf[a + h, b + h] * np.roll(eye, (a, b), axis=(1, 2))
    blur = blur.reshape(n, n)  # row k = blurred unit impulse k (X @ blur blurs each row)
    keep = np.zeros((rows, cols), dtype=bool)
    keep[phase::ratio, phase::ratio] = True
    sample = blur[:, keep.ravel()]
    d_h = (eye - np.roll(eye, 1, axis=2)).reshape(n, n)
    d_v = (eye - np.roll(eye, 1, axis=1)).reshape(n, n)

    p = basis.shape[1]
    x = cp.Variable((p, n))
    fit_h = yh.reshape(yh.shape[0], -1) - basis @ x @ sample
    fit_m = ym.reshape(1, -1) - (response @ basis)[None, :] @ x
    tv = cp.sum(cp.norm(cp.vstack([x @ d_h, x @ d_v]), 2, axis=0))
    obj = 0.5 * cp.sum_squares(fit_h) + 0.5 * lambda_m * cp.sum_squares(fit_m) + lambda_phi * tv
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value), np.asarray(x.value).reshape(p, rows, cols)
