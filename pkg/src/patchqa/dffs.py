"""Distance-from-face-space baseline scorer built on eigenfaces."""
from dataclasses import dataclass

import numpy as np

from . import serialization
from .imagecore import FLAT_EPS, as_gray_image
from .serialization import ModelFormatError

EIGENFACE_FORMAT = "patchqa/eigenface-model"
DEFAULT_VARIANCE = 0.95
MAX_COMPONENTS = 64


@dataclass(frozen=True, eq=False)
class EigenfaceModel:
    """Mean face and orthonormal principal directions (one per column of ``basis``).

    With ``standardize`` set, every vectorized image is shifted and scaled to
    zero mean and unit variance before it is compared with the model.
    """

    mean_face: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    image_shape: tuple
    standardize: bool = True

    @property
    def k(self):
        return self.basis.shape[1]

    def vectorize(self, img):
        arr = as_gray_image(img)
        if arr.shape != tuple(self.image_shape):
            raise ValueError(f"image has shape {arr.shape}, model expects {tuple(self.image_shape)}")
        return _vectorize(arr, self.standardize)


def _vectorize(arr, standardize):
    x = arr.reshape(-1).astype(np.float64)
    if standardize:
        x = x - x.mean()
        sd = np.sqrt(np.mean(x * x))
        x = x / sd if sd >= FLAT_EPS else np.zeros_like(x)
    return x


def _fix_signs(u):
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def train_pca(images, k=None, standardize=True, variance=DEFAULT_VARIANCE, max_k=MAX_COMPONENTS) -> EigenfaceModel:
    """Eigenface model from ``M > k`` equally sized images.

    If ``k`` is omitted, the smallest number of components explaining
    ``variance`` of the training variance is used, capped at ``max_k``.
    """
    arrs = [as_gray_image(img) for img in images]
    if not arrs:
        raise ValueError("no training images")
    shape = arrs[0].shape
    if any(a.shape != shape for a in arrs):
        raise ValueError("training images differ in size")
    x = np.stack([_vectorize(a, standardize) for a in arrs])
    m, dim = x.shape
    if k is not None and not 1 <= k < m:
        raise ValueError(f"need 1 <= k < number of images ({m}), got k={k}")
    mean = x.mean(axis=0)
    c = x - mean
    # eigenvalues below this are rounding noise relative to the data energy
    floor = 1e-24 * float(np.sum(x * x)) + 1e-300

    if m < dim:
        # Gram trick: eigenvectors of C C^T lift to those of C^T C
        w, v = np.linalg.eigh(c @ c.T)
        w, v = w[::-1], v[:, ::-1]
        tol = max(w[0] * 1e-10, floor)
        rank = int(np.sum(w > tol))
        u = (c.T @ v[:, :rank]) / np.sqrt(w[:rank])
    else:
        w, v = np.linalg.eigh(c.T @ c)
        w, v = w[::-1], v[:, ::-1]
        tol = max(w[0] * 1e-10, floor)
        rank = int(np.sum(w > tol))
        u = v[:, :rank]
    if rank == 0:
        raise ValueError("training images are identical; no principal components exist")

    w = w[:rank]
    if k is None:
        frac = np.cumsum(w) / np.sum(w)
        k = int(np.searchsorted(frac, variance - 1e-12) + 1)
        k = min(k, rank, max_k)
    elif k > rank:
        raise ValueError(f"only {rank} non-degenerate components available, k={k} requested")

    basis = _fix_signs(u[:, :k])
    return EigenfaceModel(mean, np.ascontiguousarray(basis), w[:k] / (m - 1), shape, standardize)


def dffs_score(model: EigenfaceModel, img) -> float:
    """Negated distance from face space; 0 is the best possible value."""
    e = model.vectorize(img) - model.mean_face
    resid = e - model.basis @ (model.basis.T @ e)
    return -float(np.linalg.norm(resid))


def save_eigenface_model(model: EigenfaceModel) -> bytes:
    body = {
        "image_shape": list(model.image_shape),
        "standardize": bool(model.standardize),
        "k": model.k,
        "mean_face": model.mean_face.tolist(),
        "eigenvalues": model.eigenvalues.tolist(),
        "basis": model.basis.T.tolist(),
    }
    return serialization.encode(EIGENFACE_FORMAT, body)


def load_eigenface_model(data) -> EigenfaceModel:
    doc = serialization.decode(data, EIGENFACE_FORMAT)
    f = serialization.field
    try:
        shape = tuple(int(s) for s in f(doc, "image_shape"))
        k = f(doc, "k", int)
        mean = np.array(f(doc, "mean_face"), dtype=np.float64)
        basis = np.ascontiguousarray(np.array(f(doc, "basis"), dtype=np.float64).T)
        eig = np.array(f(doc, "eigenvalues"), dtype=np.float64)
        dim = int(np.prod(shape))
        if len(shape) != 2 or mean.shape != (dim,) or basis.shape != (dim, k) or eig.shape != (k,):
            raise ModelFormatError("inconsistent eigenface model dimensions")
        if np.max(np.abs(basis.T @ basis - np.eye(k))) > 1e-8:
            raise ModelFormatError("eigenface basis is not orthonormal")
        return EigenfaceModel(mean, basis, eig, shape, bool(f(doc, "standardize")))
    except ModelFormatError:
        raise
    except (ValueError, TypeError) as exc:
        raise ModelFormatError(f"invalid eigenface model: {exc}") from None
