from .store import KnowledgeGraph, load_kg
from .sampling import SELF_RELATION, sample_neighbors
from .analysis import ProximityStudy, proximity_study, shortest_path_distance
