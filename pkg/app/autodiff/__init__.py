from .tensor import *
from .gradcheck import *
from . import functional as F
from .functional import NORM_FLOOR, l2_normalize_array
