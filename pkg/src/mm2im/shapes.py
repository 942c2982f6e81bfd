"""Shape algebra for strided transposed convolutions.

A transposed convolution (TCONV) with square kernel `ks` and stride `s`
scatters each input pixel into a `ks x ks` window of a padded output grid,
with windows spaced `s` apart.  The padded grid is then cropped symmetrically
down to the final output, which is exactly `s` times the input extent per
spatial axis.  Every other module in this package takes its padding/cropping
convention from here, so the convention lives in exactly one place.
"""

from __future__ import annotations

from dataclasses import dataclass


class ShapeError(ValueError):
    """Raised when TCONV parameters or tensor extents are inconsistent."""


@dataclass(frozen=True)
class TConvShape:
    """Static description of one TCONV layer.

    i_h, i_w, i_c: input height/width/channels
    ks:            square kernel size
    o_c:           output channels
    s:             stride
    pad_top/pad_left: crop offsets applied to the padded output grid
    """

    i_h: int
    i_w: int
    i_c: int
    ks: int
    o_c: int
    s: int
    pad_top: int
    pad_left: int

    def __post_init__(self) -> None:
        for name in ("i_h", "i_w", "i_c", "ks", "o_c", "s"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
                raise ShapeError(f"{name} must be a positive int, got {v!r}")
        crop = max(self.ks - self.s, 0)
        for name in ("pad_top", "pad_left"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= crop:
                raise ShapeError(f"{name} must be in [0, {crop}], got {v!r}")

    # Final output extents: stride times the input, per axis.
    @property
    def o_h(self) -> int:
        return self.s * self.i_h

    @property
    def o_w(self) -> int:
        return self.s * self.i_w

    # Padded (pre-crop) scatter grid extents.
    @property
    def p_h(self) -> int:
        return (self.i_h - 1) * self.s + self.ks

    @property
    def p_w(self) -> int:
        return (self.i_w - 1) * self.s + self.ks

    @property
    def pad_bottom(self) -> int:
        return max(self.ks - self.s, 0) - self.pad_top

    @property
    def pad_right(self) -> int:
        return max(self.ks - self.s, 0) - self.pad_left

    @property
    def overstrided(self) -> bool:
        """True when s > ks: scatter windows do not tile the output.

        In that regime the padded grid is smaller than the final output and
        some final outputs receive no contributions at all (bias only).
        """
        return self.s > self.ks

    def __str__(self) -> str:
        return (f"tconv(i={self.i_h}x{self.i_w}x{self.i_c}, ks={self.ks}, "
                f"o_c={self.o_c}, s={self.s})")


def derive_shape(i_h: int, i_w: int, i_c: int, ks: int, o_c: int, s: int) -> TConvShape:
    """Validate layer parameters and derive the crop offsets.

    The total crop per axis is `ks - s` (clamped at zero); the top/left share
    is the floor half, the remainder goes to bottom/right.  Raises ShapeError
    on non-positive dimensions.
    """
    dims = {"i_h": i_h, "i_w": i_w, "i_c": i_c, "ks": ks, "o_c": o_c, "s": s}
    for name, v in dims.items():
        if not isinstance(v, int) or isinstance(v, bool):
            raise ShapeError(f"{name} must be an int, got {v!r}")
        if v <= 0:
            raise ShapeError(f"{name} must be positive, got {v}")
    crop = max(ks - s, 0)
    return TConvShape(i_h=i_h, i_w=i_w, i_c=i_c, ks=ks, o_c=o_c, s=s,
                      pad_top=crop // 2, pad_left=crop // 2)
