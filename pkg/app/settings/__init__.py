from .dataset import *
from .evaluation import *
from .model import *
from .training import *
from .run import *
