from .checkpoint import *
from .features import *
from .reports import *
from .samples import *
from .selection import *
