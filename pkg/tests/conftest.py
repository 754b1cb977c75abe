import csv
import io

import pytest

from readmit.codebook import DRUGS, diabetes_schema

_DEFAULTS = {
    "race": "Caucasian", "gender": "Female", "age": "[60-70)", "weight": "?",
    "admission_type_id": "1", "discharge_disposition_id": "1", "admission_source_id": "7",
    "time_in_hospital": "3", "payer_code": "?", "medical_specialty": "?",
    "num_lab_procedures": "40", "num_procedures": "1", "num_medications": "12",
    "number_outpatient": "0", "number_emergency": "0", "number_inpatient": "0",
    "diag_1": "428", "diag_2": "250.01", "diag_3": "401", "number_diagnoses": "7",
    "max_glu_serum": "None", "A1Cresult": "None", "change": "No", "diabetesMed": "Yes",
    "readmitted": "NO",
}


def encounter_csv(rows, header=None) -> bytes:
    """CSV bytes in the encounter layout; each row dict overrides the defaults."""
    header = header or diabetes_schema().names
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for k, r in enumerate(rows):
        rec = {"encounter_id": str(k + 1), "patient_nbr": str(k + 1), **_DEFAULTS,
               **{d: "No" for d in DRUGS}, **r}
        w.writerow([rec[h] for h in header])
    return buf.getvalue().encode()


@pytest.fixture
def make_csv():
    return encounter_csv
