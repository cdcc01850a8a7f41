"""Exception hierarchy shared by the library modules and the CLI."""


class DehazeError(Exception):
    """Base class for every error raised by the dehazing pipeline."""


class ParameterError(DehazeError, ValueError):
    pass


class DimensionMismatchError(DehazeError, ValueError):
    pass


class DenoiserError(DehazeError):
    """A denoiser broke its contract (output shape or non-finite values)."""


class ImageFormatError(DehazeError):
    pass


def require_same_shape(*arrays, what="inputs"):
    shapes = [tuple(a.shape) for a in arrays]
    if any(s != shapes[0] for s in shapes[1:]):
        raise DimensionMismatchError(f"dimension mismatch between {what}: {shapes}")


def require_same_size(*arrays, what="inputs"):
    sizes = [tuple(a.shape[:2]) for a in arrays]
    if any(s != sizes[0] for s in sizes[1:]):
        raise DimensionMismatchError(f"dimension mismatch between {what}: {sizes}")
