from .interactions import InteractionMatrix, Split, build_dataset, load_ratings, negative_sample, split
from .synthetic import SyntheticSpec, gen_synthetic
