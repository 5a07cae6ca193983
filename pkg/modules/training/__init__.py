from .config import HyperParams
from .adam import AdamState, adam_step
from .checkpoint import checkpoint_load, checkpoint_save
from .loss import unified_loss
