#!/usr/bin/env python3
# Copyright 2026 The temed Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Normalise the two public tabular datasets into the CSV layout the acceptance
runner and `temed train` expect (id column, schema feature names, 1/0 label).

    python3 tools/prepare_datasets.py --hcv hcvdat0.csv --heart heart.csv

Without --hcv/--heart the raw files are downloaded from their public mirrors.
Output goes to data/public/ unless --out is given.
"""

import argparse
import io
import pathlib
import sys
import urllib.request

import pandas as pd

HCV_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/00571/hcvdat0.csv"
HEART_URL = "https://raw.githubusercontent.com/fedesoriano/heart-failure-prediction/main/heart.csv"

HCV_FEATURES = ["Age", "Sex", "ALB", "ALP", "ALT", "AST", "BIL", "CHE", "CHOL", "CREA", "GGT", "PROT"]
HEART_FEATURES = ["Age", "Sex", "ChestPainType", "RestingBP", "Cholesterol", "FastingBS",
                  "RestingECG", "MaxHR", "ExerciseAngina", "Oldpeak", "ST_Slope"]


def read_source(path, url):
    if path:
        return pd.read_csv(path)
    print(f"downloading {url}", file=sys.stderr)
    with urllib.request.urlopen(url, timeout=60) as resp:
        return pd.read_csv(io.BytesIO(resp.read()))


def prepare_hcv(raw):
    df = raw.drop(columns=[c for c in raw.columns if c.startswith("Unnamed")])
    df = df.dropna(subset=HCV_FEATURES).reset_index(drop=True)
    # "0=Blood Donor" and "0s=suspect Blood Donor" are negative; hepatitis, fibrosis, cirrhosis positive.
    code = df["Category"].astype(str).str.split("=").str[0]
    df["Category"] = (~code.isin(["0", "0s"])).astype(int)
    df.insert(0, "id", [f"hcv{i:04d}" for i in range(len(df))])
    return df[["id"] + HCV_FEATURES + ["Category"]]


def prepare_heart(raw):
    df = raw[raw["RestingBP"] != 0].reset_index(drop=True)
    df.insert(0, "id", [f"heart{i:04d}" for i in range(len(df))])
    return df[["id"] + HEART_FEATURES + ["HeartDisease"]]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--hcv", help="local copy of hcvdat0.csv")
    ap.add_argument("--heart", help="local copy of heart.csv")
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "public"))
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hcv = prepare_hcv(read_source(args.hcv, HCV_URL))
    heart = prepare_heart(read_source(args.heart, HEART_URL))
    hcv.to_csv(out / "hepatitis.csv", index=False)
    heart.to_csv(out / "heart.csv", index=False)
    print(f"hepatitis.csv: {len(hcv)} rows, {int(hcv['Category'].sum())} positive")
    print(f"heart.csv: {len(heart)} rows, {int(heart['HeartDisease'].sum())} positive")
    if len(hcv) != 589 or len(heart) != 917:
        print("warning: row counts differ from the expected 589 / 917", file=sys.stderr)


if __name__ == "__main__":
    main()
