from caan.tensor.models import AdamState
from caan.tensor.models import Tape
from caan.tensor.models import Tensor
from caan.tensor.models import no_grad
from caan.tensor.models import precision

__all__ = ["AdamState", "Tape", "Tensor", "no_grad", "precision"]
