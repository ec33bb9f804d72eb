import logging

from caan.exceptions import ContractError

logger = logging.getLogger(__name__)

LAMBDA_HIGH = 1.0
LAMBDA_LOW = 0.0001
LAMBDA_THRESHOLD = 0.98


def lr_at(iteration: int, lr0: float = 0.001, decay: float = 0.9, period: int = 200) -> float:
    """Step decay: ``lr0 · decay^floor(iteration / period)``."""
    if period <= 0:
        msg = f"decay period must be positive, got {period}"
        raise ContractError(msg)
    if iteration < 0:
        msg = f"iteration must be non-negative, got {iteration}"
        raise ContractError(msg)
    return lr0 * decay ** (iteration // period)


def lambda_schedule(
    device_val_accuracy: float,
    current_lambda: float,
    *,
    threshold: float = LAMBDA_THRESHOLD,
    high: float = LAMBDA_HIGH,
    low: float = LAMBDA_LOW,
) -> float:
    """Weight of the device loss; drops to ``low`` at the threshold and stays there."""
    if not 0.0 <= device_val_accuracy <= 1.0:
        msg = f"accuracy must be in [0, 1], got {device_val_accuracy}"
        raise ContractError(msg)
    if current_lambda == low or device_val_accuracy >= threshold:
        return low
    return high


class LambdaSwitch:
    """Latching device-loss weight for one training run."""

    def __init__(
        self,
        threshold: float = LAMBDA_THRESHOLD,
        high: float = LAMBDA_HIGH,
        low: float = LAMBDA_LOW,
    ) -> None:
        self.threshold = threshold
        self.high = high
        self.low = low
        self.value = high
        self.switched_at: int | None = None

    @property
    def switched(self) -> bool:
        return self.switched_at is not None

    def update(self, device_val_accuracy: float, iteration: int) -> float:
        value = lambda_schedule(
            device_val_accuracy,
            self.value,
            threshold=self.threshold,
            high=self.high,
            low=self.low,
        )
        if value != self.value:
            self.switched_at = iteration
            logger.info(
                f"Device accuracy {device_val_accuracy:.3f} reached {self.threshold} at iteration {iteration}; "
                f"lambda {self.value} -> {value}",
            )
        self.value = value
        return value
