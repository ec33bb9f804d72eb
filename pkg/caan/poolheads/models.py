from dataclasses import dataclass
from enum import StrEnum

from caan.exceptions import ShapeError
from caan.tensor.models import Tensor

ROI_BLOCK = 16


class HeadKind(StrEnum):
    FLATTEN = "flatten"
    MAX = "max"
    AVG = "avg"
    ROI = "roi"
    ATT = "att"
    ROI_ATT = "roi_att"

    @property
    def uses_attention(self) -> bool:
        return self in {HeadKind.ATT, HeadKind.ROI_ATT}

    @property
    def uses_roi(self) -> bool:
        return self in {HeadKind.ROI, HeadKind.ROI_ATT}


@dataclass(frozen=True)
class PooledVector:
    """One scalar per feature map (``R`` with ``H`` entries)."""

    values: Tensor

    def __post_init__(self) -> None:
        if self.values.ndim != 1:
            msg = f"pooled vector must be rank 1, got {self.values.shape}"
            raise ShapeError(msg)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ROIGrid:
    channels: int
    rows: int
    cols: int
    block: int = ROI_BLOCK

    @classmethod
    def for_map(cls, shape: tuple[int, ...]) -> "ROIGrid":
        channels, rows, cols = shape
        if rows % ROI_BLOCK or cols % ROI_BLOCK:
            msg = f"ROI pooling needs spatial sizes divisible by {ROI_BLOCK}, got {rows}x{cols}"
            raise ShapeError(msg)
        return cls(channels, rows // ROI_BLOCK, cols // ROI_BLOCK)

    @property
    def output_shape(self) -> tuple[int, int, int]:
        return self.channels, self.rows, self.cols


@dataclass
class AffineHead:
    weight: Tensor
    bias: Tensor

    @property
    def input_size(self) -> int:
        return self.weight.shape[1]


@dataclass
class AttentionHead:
    """Two 1×1 convolutions over an ``H×P×Q`` map, each with ``K`` output channels."""

    cls_weight: Tensor
    cls_bias: Tensor
    att_weight: Tensor
    att_bias: Tensor

    def __post_init__(self) -> None:
        if self.cls_weight.shape != self.att_weight.shape or self.cls_weight.shape[2:] != (1, 1):
            msg = (
                f"attention branches need matching 1x1 kernels, got {self.cls_weight.shape} "
                f"and {self.att_weight.shape}"
            )
            raise ShapeError(msg)

    @property
    def classes(self) -> int:
        return self.cls_weight.shape[0]


@dataclass
class Head:
    kind: HeadKind
    affine: AffineHead | None = None
    attention: AttentionHead | None = None

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        if self.affine is not None:
            params["fc.weight"] = self.affine.weight
            params["fc.bias"] = self.affine.bias
        if self.attention is not None:
            params["cls.weight"] = self.attention.cls_weight
            params["cls.bias"] = self.attention.cls_bias
            params["att.weight"] = self.attention.att_weight
            params["att.bias"] = self.attention.att_bias
        return params


@dataclass
class HeadOutput:
    scores: Tensor
    attention: Tensor | None = None
