from .ablation import *
from .evaluation import *
from .losses import *
from .optimizer import *
from .sampling import *
from .synthdata import *
from .trainer import *
