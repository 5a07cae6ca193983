from .receptive_field import ReceptiveField
from .params import ModelParams
from .gnn import backward, forward, forward_full, predict
