"""2-D FFT backend over the last two axes.

Uses torch's MKL-backed FFT when torch is importable (about 4x faster than
pocketfft on one core), falling back to ``scipy.fft``.  ``CSD_FFT=scipy``
forces the fallback; ``CSD_THREADS`` caps the backend's thread count.
Plans are chosen deterministically in both backends, so results are
bit-reproducible for a fixed backend and thread count.
"""
from __future__ import annotations

import os

import numpy as np
import scipy.fft as _sfft

_threads = max(1, min(int(os.environ.get("CSD_THREADS", os.cpu_count() or 1)), os.cpu_count() or 1))

_torch = None
if os.environ.get("CSD_FFT", "torch").lower() != "scipy":
    try:
        import torch as _torch

        _torch.set_num_threads(_threads)
    except ImportError:  # pragma: no cover - depends on environment
        _torch = None

BACKEND = "torch" if _torch is not None else "scipy"


def _as_tensor(a):
    a = np.asarray(a)
    if a.dtype not in (np.complex128, np.float64):
        a = a.astype(np.complex128 if np.iscomplexobj(a) else np.float64)
    if not a.flags.c_contiguous:
        a = np.ascontiguousarray(a)
    return _torch.from_numpy(a)


if _torch is not None:

    def fft2(a):
        return _torch.fft.fft2(_as_tensor(a)).numpy()

    def ifft2(a):
        return _torch.fft.ifft2(_as_tensor(a)).numpy()

    def rfft2(a):
        return _torch.fft.rfft2(_as_tensor(a)).numpy()

    def irfft2(a, s):
        return _torch.fft.irfft2(_as_tensor(a), s=s).numpy()

else:  # pragma: no cover - exercised only without torch

    def fft2(a):
        return _sfft.fft2(a, axes=(-2, -1), workers=_threads)

    def ifft2(a):
        return _sfft.ifft2(a, axes=(-2, -1), workers=_threads)

    def rfft2(a):
        return _sfft.rfft2(a, axes=(-2, -1), workers=_threads)

    def irfft2(a, s):
        return _sfft.irfft2(a, s=s, axes=(-2, -1), workers=_threads)
