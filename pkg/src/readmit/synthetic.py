"""Seeded generator for a small encounter file with the public dataset's layout.

The generated file has the same 50 columns, codes and missing-marker
conventions as the 130-hospital diabetes file, with a readmission signal
driven mostly by prior-utilization counts.
"""
from __future__ import annotations

import csv
import io

import numpy as np

from .codebook import DRUGS, diabetes_schema

_SPECIALTIES = ["InternalMedicine", "Cardiology", "Surgery-General", "Family/GeneralPractice",
                "Emergency/Trauma", "Orthopedics", "Nephrology", "Radiologist", "Psychiatry"]
_SPECIALTY_P = [0.30, 0.12, 0.10, 0.14, 0.14, 0.06, 0.06, 0.04, 0.04]
_PAYERS = ["MC", "HM", "SP", "BC", "MD", "CP", "UN", "CM", "OG"]
_DIAGS = ["428", "414", "786", "410", "486", "427", "491", "715", "682", "434",
          "780", "996", "276", "38", "250.8", "250.6", "250.13", "599", "584", "153",
          "V57", "E888", "578", "562", "820", "296", "401", "403", "577", "574"]
_RACES = ["Caucasian", "AfricanAmerican", "Hispanic", "Asian", "Other"]
_RACE_P = [0.76, 0.19, 0.02, 0.01, 0.02]
_AGES = [f"[{a}-{a + 10})" for a in range(0, 100, 10)]
_AGE_P = np.array([0.002, 0.008, 0.016, 0.038, 0.097, 0.17, 0.22, 0.256, 0.168, 0.025])
_AGE_P = _AGE_P / _AGE_P.sum()
_DISPOSITIONS = ["1", "3", "6", "18", "2", "22", "5", "11", "13", "14", "19"]
_DISPOSITION_P = [0.58, 0.14, 0.13, 0.03, 0.02, 0.02, 0.02, 0.03, 0.015, 0.01, 0.005]
_SOURCES = ["7", "1", "17", "4", "6", "2", "5"]
_SOURCE_P = [0.56, 0.29, 0.06, 0.03, 0.03, 0.02, 0.01]


INTERCEPT = -3.4


def _pick(rng, items, p=None):
    return items[rng.choice(len(items), p=p)]


def generate(n_patients: int = 2000, seed: int = 7) -> bytes:
    """Return the CSV file (UTF-8 bytes) for ``n_patients`` synthetic patients."""
    rng = np.random.default_rng(seed)
    header = list(diabetes_schema().names)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    eid = 2278392
    rows = []
    for p in range(n_patients):
        pid = str(135 + 97 * p)
        race = "?" if rng.random() < 0.025 else _pick(rng, _RACES, _RACE_P)
        gender = _pick(rng, ["Female", "Male"], [0.53, 0.47])
        age_i = rng.choice(10, p=_AGE_P)
        n_enc = 1 + rng.geometric(0.6) - 1
        for _ in range(n_enc):
            eid += int(rng.integers(7, 400))
            rows.append((eid, _encounter(rng, eid, pid, race, gender, age_i)))
    # file order is not chronological; the cohort builder sorts by encounter_id
    order = rng.permutation(len(rows))
    for k in order:
        w.writerow([rows[k][1][h] for h in header])
    return buf.getvalue().encode("utf-8")


def _encounter(rng, eid, pid, race, gender, age_i):
    inpatient = int(rng.poisson(0.35 + 0.6 * rng.random() ** 4))
    outpatient = int(rng.poisson(0.45))
    emergency = int(rng.poisson(0.35))
    diagnoses = int(np.clip(rng.normal(7.5, 1.9), 1, 16))
    medications = int(np.clip(rng.normal(15.5, 7.5), 1, 81))
    procedures = int(np.clip(rng.poisson(1.3), 0, 6))
    labs = int(np.clip(rng.normal(43, 19), 1, 132))
    stay = int(np.clip(1 + rng.poisson(3.3), 1, 14))
    age_mid = 10 * age_i + 5

    logit = (INTERCEPT + 1.1 * inpatient + 0.8 * emergency + 0.35 * (diagnoses - 7.5)
             + 0.07 * (medications - 15.5) - 0.45 * procedures
             + 0.9 * outpatient - 0.5 * outpatient * min(inpatient, 3)
             + 0.012 * (age_mid - 65) + 0.04 * (stay - 4))
    prob = 1.0 / (1.0 + np.exp(-logit))
    u = rng.random()
    readmitted = "<30" if u < prob else (">30" if u < prob + 0.33 else "NO")

    rec = {
        "encounter_id": str(eid), "patient_nbr": pid, "race": race, "gender": gender,
        "age": _AGES[age_i],
        "weight": _pick(rng, ["[50-75)", "[75-100)", "[100-125)"]) if rng.random() < 0.03 else "?",
        "admission_type_id": _pick(rng, ["1", "2", "3", "5", "6"], [0.53, 0.18, 0.19, 0.05, 0.05]),
        "discharge_disposition_id": _pick(rng, _DISPOSITIONS, _DISPOSITION_P),
        "admission_source_id": _pick(rng, _SOURCES, _SOURCE_P),
        "time_in_hospital": str(stay),
        "payer_code": "?" if rng.random() < 0.40 else _pick(rng, _PAYERS),
        "medical_specialty": "?" if rng.random() < 0.48 else _pick(rng, _SPECIALTIES, _SPECIALTY_P),
        "num_lab_procedures": str(labs), "num_procedures": str(procedures),
        "num_medications": str(medications), "number_outpatient": str(outpatient),
        "number_emergency": str(emergency), "number_inpatient": str(inpatient),
        "diag_1": _pick(rng, _DIAGS),
        "diag_2": "?" if rng.random() < 0.004 else _pick(rng, _DIAGS),
        "diag_3": "?" if rng.random() < 0.014 else _pick(rng, _DIAGS),
        "number_diagnoses": str(diagnoses),
        "max_glu_serum": _pick(rng, ["None", "Norm", ">200", ">300"], [0.95, 0.025, 0.015, 0.01]),
        "A1Cresult": _pick(rng, ["None", "Norm", ">7", ">8"], [0.82, 0.05, 0.04, 0.09]),
        "readmitted": readmitted,
    }
    n_drugs = 0
    for d in DRUGS:
        if d in ("metformin", "insulin", "glipizide", "glyburide", "pioglitazone",
                 "rosiglitazone", "glimepiride"):
            on = rng.random() < (0.55 if d == "insulin" else 0.12)
        else:
            on = rng.random() < 0.005
        if on:
            n_drugs += 1
            rec[d] = _pick(rng, ["Steady", "Up", "Down"], [0.7, 0.15, 0.15])
        else:
            rec[d] = "No"
    rec["change"] = "Ch" if any(rec[d] in ("Up", "Down") for d in DRUGS) else "No"
    rec["diabetesMed"] = "Yes" if n_drugs else "No"
    return rec


def write(path, n_patients: int = 2000, seed: int = 7) -> None:
    with open(path, "wb") as fh:
        fh.write(generate(n_patients, seed))
