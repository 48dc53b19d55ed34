from .ablate import ablate
from .data import gen_data
from .evaluate import evaluate
from .train import train


all_commands = [
    ("gen-data", gen_data),
    ("train", train),
    ("eval", evaluate),
    ("ablate", ablate),
]
