from enum import Enum


class DegeneracyKind(str, Enum):
    DEFECTIVE_EP = "defective_ep"
    NON_DEFECTIVE_EP = "non_defective_ep"
    ONP = "onp"


class SymmetryKind(str, Enum):
    PT = "PT"
    CP = "CP"
    PSH = "psH"
    TRS_DAG = "TRSdag"


class TrigFunction(str, Enum):
    SIN = "sin"
    COS = "cos"
    CONST = "const"


class Axis(str, Enum):
    X = "x"
    Y = "y"
    Z = "z"

    @property
    def index(self) -> int:
        return "xyz".index(self.value)


class FermiLabel(str, Enum):
    RE_GAP_ZERO = "ReGapZero"
    RE_GAP_NONZERO = "ReGapNonzero"
