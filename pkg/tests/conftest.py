import sys
from pathlib import Path

import torch

# test oracles live next to the tests
sys.path.insert(0, str(Path(__file__).parent))

torch.set_num_threads(max(1, min(4, torch.get_num_threads())))
