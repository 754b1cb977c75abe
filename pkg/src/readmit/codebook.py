"""Column schema and value groupings for the 130-hospital diabetes encounter file."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

ID = "id"
NUMERIC = "numeric"
CATEGORICAL = "categorical"
LABEL = "label"
KINDS = (ID, NUMERIC, CATEGORICAL, LABEL)


@dataclass(frozen=True)
class ColumnSpec:
    """One source column.

    ``mapper`` names an entry of :data:`MAPPERS` applied to the raw cell
    before level lookup (categoricals) or float conversion (numerics).
    ``missing_level`` is the level assigned to missing categorical cells.
    """

    name: str
    kind: str
    levels: tuple[str, ...] = ()
    mapper: str | None = None
    missing_level: str | None = "missing"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown column kind {self.kind!r} for {self.name}")
        if self.kind == CATEGORICAL and not self.levels:
            raise ValueError(f"categorical column {self.name} declares no levels")


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[ColumnSpec, ...]
    missing_marker: str = "?"
    encounter_id: str = "encounter_id"
    patient_id: str = "patient_nbr"
    disposition: str = "discharge_disposition_id"
    label: str = "readmitted"
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {c.name: c for c in self.columns}
        if len(index) != len(self.columns):
            raise ValueError("duplicate column names in schema")
        for required in (self.encounter_id, self.patient_id, self.label):
            if required not in index:
                raise ValueError(f"schema lacks required column {required!r}")
        object.__setattr__(self, "_index", index)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def width(self) -> int:
        return len(self.columns)

    def __getitem__(self, name: str) -> ColumnSpec:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def with_missing_marker(self, marker: str) -> "FeatureSchema":
        return FeatureSchema(self.columns, marker, self.encounter_id, self.patient_id,
                             self.disposition, self.label)


# ---------------------------------------------------------------- mappers

def icd9_group(code: str) -> str:
    """Collapse an ICD-9 code into the diagnosis categories used in the cohort tables."""
    code = code.strip()
    if code[:1] in ("V", "E"):
        return "Other"
    try:
        value = float(code)
    except ValueError:
        return "Other"
    if 250 <= value < 251:
        return "Diabetes"
    if 390 <= value <= 459 or int(value) == 785:
        return "Circulatory"
    if 460 <= value <= 519 or int(value) == 786:
        return "Respiratory"
    if 520 <= value <= 579 or int(value) == 787:
        return "Digestive"
    if 800 <= value <= 999:
        return "Injury"
    if 710 <= value <= 739:
        return "Musculoskeletal"
    if 580 <= value <= 629 or int(value) == 788:
        return "Genitourinary"
    if 140 <= value <= 239:
        return "Neoplasms"
    return "Other"


def specialty_group(value: str) -> str:
    if value == "InternalMedicine":
        return "InternalMedicine"
    if value == "Cardiology":
        return "Cardiology"
    if value.startswith("Surgery"):
        return "Surgery"
    if value == "Family/GeneralPractice":
        return "GeneralPractice"
    return "Other"


def admission_source_group(value: str) -> str:
    if value == "7":
        return "EmergencyRoom"
    if value in ("1", "2", "3"):
        return "Referral"
    return "Other"


def disposition_group(value: str) -> str:
    return "Home" if value == "1" else "Other"


def age_bracket(value: str) -> str:
    # "[70-80)" -> "75"
    lo, hi = value.strip("[)").split("-")
    return str((int(lo) + int(hi)) / 2)


MAPPERS: dict[str, Callable[[str], str]] = {
    "icd9": icd9_group,
    "specialty": specialty_group,
    "admission_source": admission_source_group,
    "disposition": disposition_group,
    "age_bracket": age_bracket,
}

# ---------------------------------------------------------------- default schema

DRUGS = (
    "metformin", "repaglinide", "nateglinide", "chlorpropamide", "glimepiride",
    "acetohexamide", "glipizide", "glyburide", "tolbutamide", "pioglitazone",
    "rosiglitazone", "acarbose", "miglitol", "troglitazone", "tolazamide",
    "examide", "citoglipton", "insulin", "glyburide-metformin", "glipizide-metformin",
    "glimepiride-pioglitazone", "metformin-rosiglitazone", "metformin-pioglitazone",
)
DRUG_LEVELS = ("No", "Steady", "Up", "Down")
DIAG_LEVELS = ("Circulatory", "Respiratory", "Digestive", "Diabetes", "Injury",
               "Musculoskeletal", "Genitourinary", "Neoplasms", "Other", "missing")

# Discharge disposition codes meaning expired or hospice in the public codebook.
DEATH_OR_HOSPICE_CODES = ("11", "13", "14", "19", "20", "21")
# Dropped regardless of missing fraction.
POLICY_DROPS = ("weight", "payer_code")


def _cat(name, levels, mapper=None, missing_level="missing"):
    return ColumnSpec(name, CATEGORICAL, tuple(levels), mapper, missing_level)


def _num(name, mapper=None):
    return ColumnSpec(name, NUMERIC, (), mapper, None)


def diabetes_schema(missing_marker: str = "?") -> FeatureSchema:
    cols = [
        ColumnSpec("encounter_id", ID),
        ColumnSpec("patient_nbr", ID),
        _cat("race", ("Caucasian", "AfricanAmerican", "Hispanic", "Asian", "Other", "missing")),
        _cat("gender", ("Female", "Male", "Unknown/Invalid")),
        _num("age", "age_bracket"),
        _cat("weight", ("[0-25)", "[25-50)", "[50-75)", "[75-100)", "[100-125)", "[125-150)",
                        "[150-175)", "[175-200)", ">200", "missing")),
        _cat("admission_type_id", tuple(str(i) for i in range(1, 9)) + ("missing",)),
        _cat("discharge_disposition_id", ("Home", "Other", "missing"), "disposition"),
        _cat("admission_source_id", ("EmergencyRoom", "Referral", "Other", "missing"), "admission_source"),
        _num("time_in_hospital"),
        _cat("payer_code", ("BC", "CH", "CM", "CP", "DM", "FR", "HM", "MC", "MD", "MP", "OG",
                            "OT", "PO", "SI", "SP", "UN", "WC", "missing")),
        _cat("medical_specialty", ("InternalMedicine", "Cardiology", "Surgery", "GeneralPractice",
                                   "Other", "missing"), "specialty"),
        _num("num_lab_procedures"),
        _num("num_procedures"),
        _num("num_medications"),
        _num("number_outpatient"),
        _num("number_emergency"),
        _num("number_inpatient"),
        _cat("diag_1", DIAG_LEVELS, "icd9"),
        _cat("diag_2", DIAG_LEVELS, "icd9"),
        _cat("diag_3", DIAG_LEVELS, "icd9"),
        _num("number_diagnoses"),
        _cat("max_glu_serum", ("None", "Norm", ">200", ">300"), missing_level="None"),
        _cat("A1Cresult", ("None", "Norm", ">7", ">8"), missing_level="None"),
    ]
    cols += [_cat(d, DRUG_LEVELS, missing_level="No") for d in DRUGS]
    cols += [
        _cat("change", ("No", "Ch")),
        _cat("diabetesMed", ("No", "Yes")),
        ColumnSpec("readmitted", LABEL, ("<30", ">30", "NO")),
    ]
    return FeatureSchema(tuple(cols), missing_marker)
