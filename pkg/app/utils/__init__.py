from .exceptions import *
from .log import *
from .seeding import *
from .unit_of_work import *
