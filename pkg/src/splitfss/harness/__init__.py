from .datasets import Dataset, gen_synthetic, load_idx, load_idx_pair
from .reports import RunReport
