from .checkpoints import *
from .datasets import *
from .memory import *
from .reports import *
