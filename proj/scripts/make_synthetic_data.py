#!/usr/bin/env python3
"""Generate the bundled demo datasets.

All three CSVs are synthetic. The two larger ones imitate the shape of
classic credit-risk and diabetes screening tables (mixed categorical and
numeric columns, a skewed positive class, a few incomplete rows) without
containing a single real record. Fixed RNG seeds make the files
reproducible byte for byte; rerunning this script must leave the repo
diff-clean.
"""

import json
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"

MISSING_TOKENS = ["", "NA", "N/A", "?"]


def standardize(x):
    return (x - x.mean()) / x.std()


def write_csv(path, header, columns, n_rows, missing_rows):
    """missing_rows: {row_index: column_index}; tokens cycle per row."""
    lines = [",".join(header)]
    for i in range(n_rows):
        cells = [str(col[i]) for col in columns]
        if i in missing_rows:
            cells[missing_rows[i]] = MISSING_TOKENS[i % len(MISSING_TOKENS)]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def write_schema(path, dataset_id, label, positive, features):
    doc = {
        "id": dataset_id,
        "label": label,
        "positive_label": positive,
        "features": [{"name": n, "kind": k} for n, k in features],
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")


def make_credit():
    rng = np.random.default_rng(20260401)
    n = 994

    duration = rng.integers(4, 73, n)
    amount = np.round(np.exp(rng.normal(7.6, 0.9, n))).astype(int).clip(250, 20000)
    age = rng.integers(19, 76, n)
    installment_rate = rng.integers(1, 5, n)
    residence_since = rng.integers(1, 5, n)
    existing_credits = rng.integers(1, 5, n)
    dependents = rng.integers(1, 3, n)

    checking = rng.choice(["lt0", "0to200", "ge200", "none"], n, p=[0.27, 0.27, 0.06, 0.40])
    history = rng.choice(
        ["critical", "delayed", "existing_paid", "all_paid", "none_taken"],
        n,
        p=[0.29, 0.09, 0.53, 0.05, 0.04],
    )
    purpose = rng.choice(
        ["car_new", "car_used", "furniture", "radio_tv", "education", "business"],
        n,
        p=[0.23, 0.10, 0.18, 0.28, 0.06, 0.15],
    )
    savings = rng.choice(
        ["lt100", "100to500", "500to1000", "ge1000", "unknown"],
        n,
        p=[0.60, 0.10, 0.06, 0.06, 0.18],
    )
    employment = rng.choice(
        ["unemployed", "lt1y", "1to4y", "4to7y", "ge7y"], n, p=[0.06, 0.17, 0.34, 0.17, 0.26]
    )
    personal = rng.choice(["single", "married", "divorced", "widowed"], n,
                          p=[0.55, 0.25, 0.12, 0.08])
    housing = rng.choice(["own", "rent", "free"], n, p=[0.71, 0.18, 0.11])
    job = rng.choice(["unskilled", "skilled", "management", "self_employed"], n,
                     p=[0.20, 0.63, 0.10, 0.07])
    foreign = rng.choice(["yes", "no"], n, p=[0.96, 0.04])

    checking_eff = {"lt0": 0.9, "0to200": 0.45, "ge200": -0.3, "none": -0.75}
    savings_eff = {"lt100": 0.4, "100to500": 0.15, "500to1000": -0.2, "ge1000": -0.5,
                   "unknown": -0.1}
    history_eff = {"critical": -0.55, "delayed": 0.25, "existing_paid": 0.0,
                   "all_paid": 0.45, "none_taken": 0.55}
    employment_eff = {"unemployed": 0.45, "lt1y": 0.25, "1to4y": 0.0, "4to7y": -0.15,
                      "ge7y": -0.3}

    risky_purpose = np.isin(purpose, ["car_new", "business"]).astype(float)
    z = (
        0.9 * standardize(duration)
        + 0.7 * standardize(np.log(amount))
        - 0.5 * standardize(age)
        + 0.3 * (installment_rate - 2.5)
        + np.vectorize(checking_eff.get)(checking)
        + np.vectorize(savings_eff.get)(savings)
        + np.vectorize(history_eff.get)(history)
        + np.vectorize(employment_eff.get)(employment)
        + 0.35 * standardize(duration) * risky_purpose
        + rng.normal(0.0, 0.9, n)
    )
    label = np.where(z > np.quantile(z, 0.70), "bad", "good")

    header = [
        "checking_status", "duration_months", "credit_history", "purpose",
        "credit_amount", "savings_status", "employment", "installment_rate",
        "personal_status", "residence_since", "age", "housing",
        "existing_credits", "job", "dependents", "foreign_worker", "credit_risk",
    ]
    columns = [
        checking, duration, history, purpose, amount, savings, employment,
        installment_rate, personal, residence_since, age, housing,
        existing_credits, job, dependents, foreign, label,
    ]
    missing = {57: 1, 204: 5, 391: 10, 560: 0, 731: 4, 902: 13}
    write_csv(OUT / "german_credit.csv", header, columns, n, missing)
    write_schema(
        OUT / "german_credit.schema.json", "german_credit", "credit_risk", "bad",
        [
            ("checking_status", "categorical"), ("duration_months", "numeric"),
            ("credit_history", "categorical"), ("purpose", "categorical"),
            ("credit_amount", "numeric"), ("savings_status", "categorical"),
            ("employment", "categorical"), ("installment_rate", "numeric"),
            ("personal_status", "categorical"), ("residence_since", "numeric"),
            ("age", "numeric"), ("housing", "categorical"),
            ("existing_credits", "numeric"), ("job", "categorical"),
            ("dependents", "numeric"), ("foreign_worker", "categorical"),
        ],
    )
    print("german_credit:", n, "rows,", len(missing), "incomplete,",
          (label == "bad").mean().round(3), "positive")


def make_diabetes():
    rng = np.random.default_rng(20260402)
    n = 400

    age = rng.integers(21, 71, n)
    pregnancies = rng.poisson(np.clip((age - 18) / 9.0, 0.2, None)).clip(0, 15)
    bmi = np.round(rng.normal(32.0, 6.5, n), 1).clip(18.0, 55.0)
    skin = np.round(0.9 * bmi + rng.normal(0, 7, n)).astype(int).clip(7, 63)
    glucose = np.round(rng.normal(120, 30, n) + 0.8 * (age - 40)).astype(int).clip(56, 199)
    insulin = np.round(np.exp(rng.normal(4.4, 0.7, n)) + 0.6 * (glucose - 120)).astype(int)
    insulin = insulin.clip(15, 846)
    pressure = np.round(rng.normal(70, 11, n) + 0.25 * (bmi - 32)).astype(int).clip(24, 122)
    pedigree = np.round(np.exp(rng.normal(-0.9, 0.55, n)), 3).clip(0.078, 2.42)

    # flat coefficient profile: several features compete for the top ranks,
    # so retrained models disagree about membership rather than only magnitude
    z = (
        0.7 * standardize(glucose)
        + 0.6 * standardize(bmi)
        + 0.5 * standardize(age)
        + 0.5 * standardize(pedigree)
        + 0.45 * standardize(pregnancies)
        + 0.35 * standardize(insulin)
        + 0.4 * standardize(glucose) * standardize(bmi)
        + 0.35 * standardize(age) * standardize(pedigree)
        + rng.normal(0.0, 1.1, n)
    )
    label = np.where(z > np.quantile(z, 0.66), "1", "0")

    header = ["pregnancies", "glucose", "blood_pressure", "skin_thickness",
              "insulin", "bmi", "pedigree", "age", "outcome"]
    columns = [pregnancies, glucose, pressure, skin, insulin, bmi, pedigree, age, label]
    missing = {33: 4, 101: 1, 168: 5, 219: 3, 264: 2, 307: 6, 348: 0, 388: 7}
    write_csv(OUT / "diabetes.csv", header, columns, n, missing)
    write_schema(
        OUT / "diabetes.schema.json", "diabetes", "outcome", "1",
        [(name, "numeric") for name in header[:-1]],
    )
    print("diabetes:", n, "rows,", len(missing), "incomplete,",
          (label == "1").mean().round(3), "positive")


def make_toy():
    rng = np.random.default_rng(20260403)
    n = 48
    x0 = np.round(rng.normal(0, 1, n), 3)
    x1 = np.round(rng.normal(0, 1, n), 3)
    color = rng.choice(["red", "green", "blue"], n)
    z = x0 - x1 + (color == "red") * 1.2 + rng.normal(0, 0.5, n)
    label = np.where(z > 0.2, "1", "0")

    write_csv(OUT / "toy.csv", ["x0", "x1", "color", "y"], [x0, x1, color, label], n, {})
    write_schema(
        OUT / "toy.schema.json", "toy", "y", "1",
        [("x0", "numeric"), ("x1", "numeric"), ("color", "categorical")],
    )
    print("toy:", n, "rows,", (label == "1").mean().round(3), "positive")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    make_credit()
    make_diabetes()
    make_toy()
