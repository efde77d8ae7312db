"""Training losses recorded on a tape."""
from ..spd import mat_invsqrt


def affine_sq_distance(tape, eps, pred):
    """``d(eps, pred)^2 = ||log(eps^-1/2 pred eps^-1/2)||_F^2`` per sample;
    ``eps`` is a constant array, ``pred`` a tape node."""
    C = tape.constant(mat_invsqrt(eps))
    return tape.sum_squares(tape.log(tape.bimap(C, pred)))


def frobenius_sq_distance(tape, eps, pred):
    return tape.sum_squares(tape.sub(pred, tape.constant(eps)))


LOSSES = {"affine": affine_sq_distance, "frobenius": frobenius_sq_distance}
